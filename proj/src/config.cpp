#include "gamcn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gamcn/csv.hpp"
#include "gamcn/errors.hpp"
#include "gamcn/kv.hpp"

namespace gamcn {

namespace {

std::size_t to_size(const KeyValue& kv, const std::string& source) {
    std::size_t v = 0;
    const auto& s = kv.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(source + ":" + std::to_string(kv.line) + ": " + kv.key + " expects a non-negative integer, got '" +
                          s + "'");
    }
    return v;
}

double to_real(const KeyValue& kv, const std::string& source) {
    double v = 0.0;
    const auto& s = kv.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError(source + ":" + std::to_string(kv.line) + ": " + kv.key + " expects a finite number, got '" + s +
                          "'");
    }
    return v;
}

bool to_bool(const KeyValue& kv, const std::string& source) {
    if (kv.value == "true" || kv.value == "1") return true;
    if (kv.value == "false" || kv.value == "0") return false;
    throw ConfigError(source + ":" + std::to_string(kv.line) + ": " + kv.key + " expects true or false, got '" + kv.value +
                      "'");
}

template <typename F>
auto enum_value(const KeyValue& kv, const std::string& source, F&& parse) {
    try {
        return parse(kv.value);
    } catch (const ConfigError& e) {
        throw ConfigError(source + ":" + std::to_string(kv.line) + ": " + e.what());
    }
}

using Setter = std::function<void(const KeyValue&, const std::string&)>;

std::map<std::string, Setter> model_setters(ModelConfig& m) {
    return {
        {"vertices", [&m](const KeyValue& kv, const std::string& s) { m.vertices = to_size(kv, s); }},
        {"conditions", [&m](const KeyValue& kv, const std::string& s) { m.conditions = to_size(kv, s); }},
        {"p", [&m](const KeyValue& kv, const std::string& s) { m.p = to_size(kv, s); }},
        {"q", [&m](const KeyValue& kv, const std::string& s) { m.q = to_size(kv, s); }},
        {"d", [&m](const KeyValue& kv, const std::string& s) { m.latent = to_size(kv, s); }},
        {"hops", [&m](const KeyValue& kv, const std::string& s) { m.hops = to_size(kv, s); }},
        {"layers", [&m](const KeyValue& kv, const std::string& s) { m.layers = to_size(kv, s); }},
        {"mapper_hidden", [&m](const KeyValue& kv, const std::string& s) { m.mapper_hidden = to_size(kv, s); }},
        {"spatial", [&m](const KeyValue& kv, const std::string& s) { m.spatial = enum_value(kv, s, parse_spatial_variant); }},
        {"ablation", [&m](const KeyValue& kv, const std::string& s) { m.ablation = enum_value(kv, s, parse_ablation); }},
        {"fallback_zp", [&m](const KeyValue& kv, const std::string& s) { m.fallback_zp = to_bool(kv, s); }},
        {"holiday_mode",
         [&m](const KeyValue& kv, const std::string& s) { m.holiday_mode = enum_value(kv, s, parse_holiday_mode); }},
        {"seed", [&m](const KeyValue& kv, const std::string& s) { m.seed = to_size(kv, s); }},
        {"pgcn_walks", [&m](const KeyValue& kv, const std::string& s) { m.pgcn_walks = to_size(kv, s); }},
        {"pgcn_walk_length", [&m](const KeyValue& kv, const std::string& s) { m.pgcn_walk_length = to_size(kv, s); }},
    };
}

void apply(const std::vector<KeyValue>& kvs, const std::map<std::string, Setter>& setters, const std::string& source) {
    for (const auto& kv : kvs) {
        const auto it = setters.find(kv.key);
        if (it == setters.end()) {
            throw ConfigError(source + ":" + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
        }
        it->second(kv, source);
    }
}

void write_model_keys(std::ostream& out, const ModelConfig& m) {
    out << "p=" << m.p << '\n'
        << "q=" << m.q << '\n'
        << "d=" << m.latent << '\n'
        << "hops=" << m.hops << '\n'
        << "layers=" << m.layers << '\n'
        << "mapper_hidden=" << m.mapper_hidden << '\n'
        << "spatial=" << to_string(m.spatial) << '\n'
        << "ablation=" << to_string(m.ablation) << '\n'
        << "fallback_zp=" << (m.fallback_zp ? "true" : "false") << '\n'
        << "holiday_mode=" << to_string(m.holiday_mode) << '\n'
        << "seed=" << m.seed << '\n'
        << "pgcn_walks=" << m.pgcn_walks << '\n'
        << "pgcn_walk_length=" << m.pgcn_walk_length << '\n';
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    const auto kvs = parse_key_values(in, source);
    RunConfig c;
    auto setters = model_setters(c.model);
    setters.erase("vertices");
    setters.erase("conditions");
    auto& t = c.train;
    auto& g = c.gan;
    auto& e = c.eval;
    const std::map<std::string, Setter> extra{
        {"learning_rate", [&t](const KeyValue& kv, const std::string& s) { t.learning_rate = to_real(kv, s); }},
        {"batch_size", [&t](const KeyValue& kv, const std::string& s) { t.batch_size = to_size(kv, s); }},
        {"max_epochs", [&t](const KeyValue& kv, const std::string& s) { t.max_epochs = to_size(kv, s); }},
        {"patience", [&t](const KeyValue& kv, const std::string& s) { t.patience = to_size(kv, s); }},
        {"adam_beta1", [&t](const KeyValue& kv, const std::string& s) { t.adam_beta1 = to_real(kv, s); }},
        {"adam_beta2", [&t](const KeyValue& kv, const std::string& s) { t.adam_beta2 = to_real(kv, s); }},
        {"adam_eps", [&t](const KeyValue& kv, const std::string& s) { t.adam_eps = to_real(kv, s); }},
        {"max_steps", [&t](const KeyValue& kv, const std::string& s) { t.max_steps = to_size(kv, s); }},
        {"train_seed", [&t](const KeyValue& kv, const std::string& s) { t.seed = to_size(kv, s); }},
        {"gan_lambda", [&g](const KeyValue& kv, const std::string& s) { g.lambda = to_real(kv, s); }},
        {"gan_gen_epochs_per_disc", [&g](const KeyValue& kv, const std::string& s) { g.gen_epochs_per_disc = to_size(kv, s); }},
        {"gan_epochs", [&g](const KeyValue& kv, const std::string& s) { g.gen_epochs = to_size(kv, s); }},
        {"gan_disc_learning_rate", [&g](const KeyValue& kv, const std::string& s) { g.disc_learning_rate = to_real(kv, s); }},
        {"gan_disc_latent", [&g](const KeyValue& kv, const std::string& s) { g.disc_latent = to_size(kv, s); }},
        {"gan_disc_zero_head", [&g](const KeyValue& kv, const std::string& s) { g.disc_zero_head = to_bool(kv, s); }},
        {"buckets",
         [&e](const KeyValue& kv, const std::string& s) {
             e.buckets.clear();
             for (const auto& piece : split_list(kv.value)) e.buckets.push_back(to_size({kv.key, piece, kv.line}, s));
         }},
        {"kl_bins", [&e](const KeyValue& kv, const std::string& s) { e.kl_bins = to_size(kv, s); }},
        {"kl_order", [&e](const KeyValue& kv, const std::string& s) { e.kl_order = enum_value(kv, s, parse_kl_order); }},
    };
    setters.insert(extra.begin(), extra.end());
    apply(kvs, setters, source);
    t.validate();
    g.validate();
    if (e.kl_bins == 0) throw ConfigError(source + ": kl_bins must be >= 1");
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.string());
}

std::string to_text(const RunConfig& c) {
    std::ostringstream out;
    write_model_keys(out, c.model);
    const auto& t = c.train;
    out << "learning_rate=" << format_double(t.learning_rate) << '\n'
        << "batch_size=" << t.batch_size << '\n'
        << "max_epochs=" << t.max_epochs << '\n'
        << "patience=" << t.patience << '\n'
        << "adam_beta1=" << format_double(t.adam_beta1) << '\n'
        << "adam_beta2=" << format_double(t.adam_beta2) << '\n'
        << "adam_eps=" << format_double(t.adam_eps) << '\n'
        << "max_steps=" << t.max_steps << '\n'
        << "train_seed=" << t.seed << '\n';
    const auto& g = c.gan;
    out << "gan_lambda=" << format_double(g.lambda) << '\n'
        << "gan_gen_epochs_per_disc=" << g.gen_epochs_per_disc << '\n'
        << "gan_epochs=" << g.gen_epochs << '\n'
        << "gan_disc_learning_rate=" << format_double(g.disc_learning_rate) << '\n'
        << "gan_disc_latent=" << g.disc_latent << '\n'
        << "gan_disc_zero_head=" << (g.disc_zero_head ? "true" : "false") << '\n';
    out << "buckets=";
    for (std::size_t i = 0; i < c.eval.buckets.size(); ++i) out << (i ? "," : "") << c.eval.buckets[i];
    out << '\n' << "kl_bins=" << c.eval.kl_bins << '\n' << "kl_order=" << to_string(c.eval.kl_order) << '\n';
    return out.str();
}

std::string model_config_to_text(const ModelConfig& m) {
    std::ostringstream out;
    out << "vertices=" << m.vertices << '\n' << "conditions=" << m.conditions << '\n';
    write_model_keys(out, m);
    return out.str();
}

ModelConfig parse_model_config(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    ModelConfig m;
    apply(parse_key_values(in, source), model_setters(m), source);
    return m;
}

}  // namespace gamcn
