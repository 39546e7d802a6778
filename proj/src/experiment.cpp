#include "gamcn/experiment.hpp"

#include "gamcn/csv.hpp"
#include "gamcn/errors.hpp"

namespace gamcn {

PreparedData prepare_data(const TrafficDataset& ds, std::size_t p, std::size_t q) {
    PreparedData out;
    out.raw = make_windows(ds, p, q);
    out.normalizer = Normalizer::fit(ds, out.raw.ranges.train_end);
    out.train = normalize_windows(out.raw.train, out.normalizer);
    out.val = normalize_windows(out.raw.val, out.normalizer);
    out.test = normalize_windows(out.raw.test, out.normalizer);
    return out;
}

ModelConfig resolve_model_config(const RunConfig& config, const TrafficDataset& ds) {
    ModelConfig m = config.model;
    m.vertices = ds.vertices;
    m.conditions = ds.condition_count();
    return m;
}

ModelConfig apply_variant(ModelConfig config, const std::string& variant) {
    for (auto a : {Ablation::full, Ablation::no_spatial, Ablation::no_temporal, Ablation::attention_off}) {
        if (to_string(a) == variant) {
            config.ablation = a;
            return config;
        }
    }
    try {
        config.spatial = parse_spatial_variant(variant);
    } catch (const ConfigError&) {
        throw ConfigError("unknown variant '" + variant +
                          "' (expected full, no_spatial, no_temporal, attention_off, gcn, dgcn, pgcn, lpgcn, lpgcn_a)");
    }
    config.ablation = Ablation::full;
    return config;
}

FitResult fit_model(const TrafficDataset& ds, const PreparedData& data, const RunConfig& config, bool gan,
                    std::ostream* history) {
    const ModelConfig mc = resolve_model_config(config, ds);
    FitResult out{Gamcn(mc, ds.graph), {}, std::nullopt};
    if (!gan) {
        out.train = train(out.model, data.train, data.val, config.train, {}, history);
        return out;
    }
    Discriminator::Options opt;
    opt.vertices = mc.vertices;
    opt.conditions = mc.conditions;
    opt.horizon = mc.q;
    opt.latent = config.gan.disc_latent;
    opt.hidden = mc.mapper_hidden;
    opt.seed = mc.seed + 1;
    opt.zero_head = config.gan.disc_zero_head;
    Discriminator disc(opt);
    out.gan = gan_train(out.model, disc, data.train, data.val, config.train, config.gan, history);
    return out;
}

std::vector<Tensor> predict_windows(const Gamcn& model, const Normalizer& norm, const std::vector<SampleWindow>& windows) {
    std::vector<Tensor> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(norm.invert(predict(model, w)));
    return out;
}

MetricReport score_predictions(const std::vector<Tensor>& predictions, const std::vector<SampleWindow>& raw,
                               const EvalConfig& eval, bool with_kl) {
    if (predictions.size() != raw.size()) throw ContractError("prediction count does not match the window count");
    if (raw.empty()) throw ConfigError("no windows to score");
    const std::size_t q = raw.front().target.dim(0);
    std::vector<std::size_t> buckets;
    for (auto b : eval.buckets) {
        if (b <= q) buckets.push_back(b);
    }
    MetricAccumulator acc(q, buckets);
    std::vector<double> pooled_pred, pooled_truth;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        acc.add(predictions[i], raw[i].target);
        if (with_kl) {
            pooled_pred.insert(pooled_pred.end(), predictions[i].values().begin(), predictions[i].values().end());
            pooled_truth.insert(pooled_truth.end(), raw[i].target.values().begin(), raw[i].target.values().end());
        }
    }
    MetricReport report = acc.finish();
    if (with_kl) report.kl = kl_divergence(pooled_pred, pooled_truth, eval.kl_bins, eval.kl_order);
    return report;
}

MetricReport evaluate_model(const Gamcn& model, const PreparedData& data, const EvalConfig& eval, bool with_kl) {
    return score_predictions(predict_windows(model, data.normalizer, data.test), data.raw.test, eval, with_kl);
}

MetricReport evaluate_baseline(const TrafficDataset& ds, const PreparedData& data, const EvalConfig& eval, bool with_kl) {
    const HistoricalAverage ha(ds, data.raw.ranges.train_end);
    std::vector<Tensor> preds;
    preds.reserve(data.raw.test.size());
    for (const auto& w : data.raw.test) preds.push_back(ha.predict(ds, w));
    return score_predictions(preds, data.raw.test, eval, with_kl);
}

void write_predictions_csv(std::ostream& out, const TrafficDataset& ds, const std::vector<SampleWindow>& raw,
                           const std::vector<Tensor>& predictions) {
    const std::size_t c = ds.condition_count();
    out << "timestamp,horizon";
    for (std::size_t v = 0; v < ds.vertices; ++v) {
        for (std::size_t k = 0; k < c; ++k) {
            out << ",v" << v;
            if (c > 1 || ds.conditions[0] != "speed") out << '_' << ds.conditions[k];
        }
    }
    out << '\n';
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& w = raw[i];
        const std::size_t p = w.input.dim(0), q = w.target.dim(0), frame = ds.vertices * c;
        const auto vals = predictions[i].values();
        for (std::size_t h = 0; h < q; ++h) {
            out << format_instant(ds.timestamps[w.start + p + h]) << ',' << (h + 1);
            for (std::size_t j = 0; j < frame; ++j) out << ',' << format_double(vals[h * frame + j]);
            out << '\n';
        }
    }
}

}  // namespace gamcn
