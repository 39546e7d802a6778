// Command-line front end: synth, train, predict, evaluate, ablate, baseline.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "gamcn/checkpoint.hpp"
#include "gamcn/errors.hpp"
#include "gamcn/experiment.hpp"
#include "gamcn/kv.hpp"

namespace {

using namespace gamcn;
using nlohmann::json;

std::vector<std::size_t> parse_buckets(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& piece : split_list(text)) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(piece, &pos);
        } catch (const std::logic_error&) {
            pos = 0;
        }
        if (pos != piece.size() || v == 0) throw ConfigError("bucket '" + piece + "' is not a positive integer");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--buckets needs at least one horizon step");
    return out;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

json model_echo(const ModelConfig& m) {
    return {{"vertices", m.vertices},
            {"conditions", m.conditions},
            {"p", m.p},
            {"q", m.q},
            {"d", m.latent},
            {"hops", m.hops},
            {"layers", m.layers},
            {"spatial", to_string(m.spatial)},
            {"ablation", to_string(m.ablation)},
            {"fallback_zp", m.fallback_zp},
            {"holiday_mode", to_string(m.holiday_mode)},
            {"seed", m.seed}};
}

struct Loaded {
    TrafficDataset ds;
    Checkpoint ckpt;
};

Loaded load_for_checkpoint(const std::string& data_dir, const std::string& ckpt_path) {
    Loaded l{load_dataset_dir(data_dir), read_checkpoint(ckpt_path)};
    if (l.ckpt.config.vertices != l.ds.vertices || l.ckpt.config.conditions != l.ds.condition_count()) {
        throw LoadError("checkpoint expects " + std::to_string(l.ckpt.config.vertices) + " vertices x " +
                        std::to_string(l.ckpt.config.conditions) + " conditions, dataset has " +
                        std::to_string(l.ds.vertices) + " x " + std::to_string(l.ds.condition_count()));
    }
    return l;
}

// The checkpoint's normalizer replaces the one fitted from the data so that
// predictions use the statistics the model was trained with.
PreparedData prepare_with(const TrafficDataset& ds, const Checkpoint& ck) {
    PreparedData data = prepare_data(ds, ck.config.p, ck.config.q);
    data.normalizer = ck.normalizer;
    data.train = normalize_windows(data.raw.train, data.normalizer);
    data.val = normalize_windows(data.raw.val, data.normalizer);
    data.test = normalize_windows(data.raw.test, data.normalizer);
    return data;
}

const std::vector<SampleWindow>& pick(const PreparedData& d, const std::string& split, bool raw) {
    if (split == "train") return raw ? d.raw.train : d.train;
    if (split == "val") return raw ? d.raw.val : d.val;
    if (split == "test") return raw ? d.raw.test : d.test;
    throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
}

std::string one_line(std::string s) {
    for (auto& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAMCN traffic forecaster"};
    app.require_subcommand(1);

    // synth
    SynthOptions so;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic traffic dataset");
    synth->add_option("--vertices", so.vertices, "Number of vertices")->default_val(20);
    synth->add_option("--days", so.days, "Number of days")->default_val(14);
    synth->add_option("--interval", so.interval_minutes, "Interval in minutes")->default_val(5);
    synth->add_option("--clusters", so.clusters, "Number of vertex clusters")->default_val(4);
    synth->add_option("--noise", so.noise_sigma, "Noise standard deviation (km/h)")->default_val(1.0);
    synth->add_option("--seed", so.seed, "Random seed")->default_val(1);
    synth->add_option("--out", synth_out, "Output directory")->required();

    // train
    std::string data_dir, config_path, ckpt_path, history_path;
    bool use_gan = false;
    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    train_cmd->add_option("--config", config_path, "key=value config file")->required();
    train_cmd->add_option("--out", ckpt_path, "Checkpoint path")->required();
    train_cmd->add_flag("--gan", use_gan, "Adversarial training with the combined generator loss");
    train_cmd->add_option("--history", history_path, "JSON-lines history file (default: stdout)");

    // predict
    std::string pred_out, split = "test";
    auto* predict_cmd = app.add_subcommand("predict", "Write predictions for a split");
    predict_cmd->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
    predict_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    predict_cmd->add_option("--out", pred_out, "Predictions CSV")->required();
    predict_cmd->add_option("--split", split, "train, val or test")->default_val("test");

    // evaluate
    std::string buckets_text = "3,6,12", report_path, kl_order = "truth_first";
    bool with_kl = false;
    std::size_t kl_bins = 50;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
    eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
    eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    eval_cmd->add_option("--buckets", buckets_text, "Horizon steps to report")->default_val("3,6,12");
    eval_cmd->add_option("--report", report_path, "Report JSON")->required();
    eval_cmd->add_flag("--kl", with_kl, "Also report the KL divergence");
    eval_cmd->add_option("--kl-bins", kl_bins, "Histogram bins for KL")->default_val(50);
    eval_cmd->add_option("--kl-order", kl_order, "truth_first or pred_first")->default_val("truth_first");

    // ablate
    std::string variants_text = "full,no_spatial,no_temporal,attention_off,gcn,dgcn,pgcn";
    auto* ablate_cmd = app.add_subcommand("ablate", "Train and score several variants");
    ablate_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    ablate_cmd->add_option("--config", config_path, "key=value config file")->required();
    ablate_cmd->add_option("--variants", variants_text, "Comma-separated variant names")
        ->default_val("full,no_spatial,no_temporal,attention_off,gcn,dgcn,pgcn");
    ablate_cmd->add_option("--report", report_path, "Report JSON")->required();

    // baseline
    auto* baseline_cmd = app.add_subcommand("baseline", "Score the historical-average baseline");
    baseline_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    baseline_cmd->add_option("--report", report_path, "Report JSON")->required();
    baseline_cmd->add_option("--buckets", buckets_text, "Horizon steps to report")->default_val("3,6,12");
    std::size_t baseline_p = 12, baseline_q = 12;
    baseline_cmd->add_option("--p", baseline_p, "Input window length used to align windows")->default_val(12);
    baseline_cmd->add_option("--q", baseline_q, "Prediction horizon")->default_val(12);
    baseline_cmd->add_flag("--kl", with_kl, "Also report the KL divergence");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        if (*synth) {
            const auto ds = synthesize_dataset(so);
            save_dataset_dir(ds, synth_out);
            std::cout << "wrote " << ds.length() << " stamps x " << ds.vertices << " vertices to " << synth_out << '\n';
        } else if (*train_cmd) {
            const auto ds = load_dataset_dir(data_dir);
            const auto cfg = load_run_config(config_path);
            const auto data = prepare_data(ds, cfg.model.p, cfg.model.q);
            std::ofstream history_file;
            std::ostream* history = &std::cout;
            if (!history_path.empty()) {
                history_file.open(history_path);
                if (!history_file) throw LoadError("cannot write '" + history_path + "'");
                history = &history_file;
            }
            auto fit = fit_model(ds, data, cfg, use_gan, history);
            save_checkpoint(ckpt_path, fit.model, data.normalizer, ds.graph);
            std::cerr << "checkpoint written to " << ckpt_path << '\n';
        } else if (*predict_cmd) {
            const auto l = load_for_checkpoint(data_dir, ckpt_path);
            const auto model = instantiate(l.ckpt, l.ds.graph);
            const auto data = prepare_with(l.ds, l.ckpt);
            const auto preds = predict_windows(model, data.normalizer, pick(data, split, false));
            std::ofstream out(pred_out);
            if (!out) throw LoadError("cannot write '" + pred_out + "'");
            write_predictions_csv(out, l.ds, pick(data, split, true), preds);
        } else if (*eval_cmd) {
            const auto l = load_for_checkpoint(data_dir, ckpt_path);
            const auto model = instantiate(l.ckpt, l.ds.graph);
            const auto data = prepare_with(l.ds, l.ckpt);
            EvalConfig eval;
            eval.buckets = parse_buckets(buckets_text);
            eval.kl_bins = kl_bins;
            eval.kl_order = parse_kl_order(kl_order);
            for (auto b : eval.buckets) {
                if (b > l.ckpt.config.q) {
                    throw ConfigError("bucket " + std::to_string(b) + " exceeds the model horizon q = " +
                                      std::to_string(l.ckpt.config.q));
                }
            }
            auto report = evaluate_model(model, data, eval, with_kl);
            report.config = model_echo(l.ckpt.config);
            report.config["interval_minutes"] = l.ds.interval_minutes;
            report.config["kl_bins"] = eval.kl_bins;
            report.config["kl_order"] = to_string(eval.kl_order);
            write_json(report_path, report.to_json());
        } else if (*ablate_cmd) {
            const auto ds = load_dataset_dir(data_dir);
            const auto cfg = load_run_config(config_path);
            const auto data = prepare_data(ds, cfg.model.p, cfg.model.q);
            json out;
            out["variants"] = json::object();
            for (const auto& name : split_list(variants_text)) {
                RunConfig vc = cfg;
                vc.model = apply_variant(cfg.model, name);
                std::cerr << "training variant " << name << '\n';
                auto fit = fit_model(ds, data, vc, false, nullptr);
                auto report = evaluate_model(fit.model, data, vc.eval, false);
                report.config = model_echo(fit.model.config());
                report.config["best_epoch"] = fit.train.best_epoch;
                out["variants"][name] = report.to_json();
            }
            out["baseline"] = evaluate_baseline(ds, data, cfg.eval, false).to_json();
            write_json(report_path, out);
        } else if (*baseline_cmd) {
            const auto ds = load_dataset_dir(data_dir);
            const auto data = prepare_data(ds, baseline_p, baseline_q);
            EvalConfig eval;
            eval.buckets = parse_buckets(buckets_text);
            auto report = evaluate_baseline(ds, data, eval, with_kl);
            report.config = {{"baseline", "historical_average"}, {"p", baseline_p}, {"q", baseline_q}};
            write_json(report_path, report.to_json());
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
