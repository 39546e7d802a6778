#include "gamcn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gamcn/errors.hpp"

namespace gamcn {

nlohmann::json MetricReport::to_json() const {
    auto bucket_json = [](const BucketMetrics& b) {
        return nlohmann::json{{"horizon", b.horizon}, {"mae", b.mae},     {"rmse", b.rmse},
                              {"mape", b.mape},       {"count", b.count}, {"mape_skipped", b.mape_skipped}};
    };
    nlohmann::json j;
    j["buckets"] = nlohmann::json::array();
    for (const auto& b : buckets) j["buckets"].push_back(bucket_json(b));
    j["overall"] = bucket_json(overall);
    j["samples"] = samples;
    j["kl"] = kl ? nlohmann::json(*kl) : nlohmann::json(nullptr);
    j["config"] = config;
    return j;
}

MetricAccumulator::MetricAccumulator(std::size_t q, std::vector<std::size_t> buckets)
    : q_(q), buckets_(std::move(buckets)), per_step_(q) {
    if (q == 0) throw ConfigError("metric accumulator needs q >= 1");
    for (auto b : buckets_) {
        if (b == 0 || b > q) {
            throw ConfigError("horizon bucket " + std::to_string(b) + " outside [1, " + std::to_string(q) + "]");
        }
    }
}

void MetricAccumulator::add(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) {
        throw DimensionError("metrics: prediction " + shape_string(pred.shape()) + " vs truth " +
                             shape_string(truth.shape()));
    }
    if (pred.dim(0) != q_) throw DimensionError("metrics: expected " + std::to_string(q_) + " horizon steps");
    const auto p = pred.values(), t = truth.values();
    const std::size_t per = p.size() / q_;
    for (std::size_t i = 0; i < q_; ++i) {
        auto& s = per_step_[i];
        for (std::size_t k = i * per; k < (i + 1) * per; ++k) {
            const double diff = p[k] - t[k];
            s.abs += std::abs(diff);
            s.sq += diff * diff;
            ++s.count;
            if (std::abs(t[k]) < kMapeFloor) {
                ++s.skipped;
            } else {
                s.pct += std::abs(diff / t[k]);
                ++s.pct_count;
            }
        }
    }
    ++samples_;
}

BucketMetrics MetricAccumulator::summarize(const Sums& s, std::size_t horizon) const {
    BucketMetrics b;
    b.horizon = horizon;
    b.count = s.count;
    b.mape_skipped = s.skipped;
    if (s.count) {
        b.mae = s.abs / static_cast<double>(s.count);
        b.rmse = std::sqrt(s.sq / static_cast<double>(s.count));
    }
    if (s.pct_count) b.mape = 100.0 * s.pct / static_cast<double>(s.pct_count);
    return b;
}

MetricReport MetricAccumulator::finish() const {
    MetricReport r;
    r.samples = samples_;
    Sums all;
    for (const auto& s : per_step_) {
        all.abs += s.abs;
        all.sq += s.sq;
        all.pct += s.pct;
        all.count += s.count;
        all.pct_count += s.pct_count;
        all.skipped += s.skipped;
    }
    for (auto b : buckets_) r.buckets.push_back(summarize(per_step_[b - 1], b));
    r.overall = summarize(all, 0);
    return r;
}

MetricReport compute_metrics(const Tensor& pred, const Tensor& truth, const std::vector<std::size_t>& buckets) {
    if (pred.rank() == 0 || pred.shape() != truth.shape()) {
        throw DimensionError("metrics: prediction " + shape_string(pred.shape()) + " vs truth " +
                             shape_string(truth.shape()));
    }
    MetricAccumulator acc(pred.dim(0), buckets);
    acc.add(pred, truth);
    return acc.finish();
}

std::string to_string(KlOrder o) { return o == KlOrder::truth_first ? "truth_first" : "pred_first"; }

KlOrder parse_kl_order(const std::string& name) {
    if (name == "truth_first") return KlOrder::truth_first;
    if (name == "pred_first") return KlOrder::pred_first;
    throw ConfigError("unknown KL order '" + name + "' (expected truth_first or pred_first)");
}

std::vector<double> histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (values.empty()) throw ContractError("histogram of an empty value set");
    std::vector<double> h(bins, 0.0);
    const double width = hi - lo;
    for (double v : values) {
        std::size_t b = 0;
        if (width > 0.0) {
            const double pos = (v - lo) / width * static_cast<double>(bins);
            b = pos <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
        }
        h[b] += 1.0;
    }
    for (auto& x : h) x /= static_cast<double>(values.size());
    return h;
}

double kl_from_distributions(std::span<const double> p, std::span<const double> q, double smoothing) {
    if (p.size() != q.size() || p.empty()) throw DimensionError("KL needs two distributions over the same bins");
    std::vector<double> qs(q.begin(), q.end());
    double total = 0.0;
    for (auto& x : qs) {
        if (x <= 0.0) x = smoothing;
        total += x;
    }
    for (auto& x : qs) x /= total;
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / qs[i]);
    }
    return std::max(0.0, kl);
}

double kl_divergence(std::span<const double> pred_values, std::span<const double> truth_values, std::size_t bins,
                     KlOrder order) {
    if (pred_values.empty() || truth_values.empty()) throw ContractError("KL divergence of an empty value set");
    const auto [plo, phi] = std::minmax_element(pred_values.begin(), pred_values.end());
    const auto [tlo, thi] = std::minmax_element(truth_values.begin(), truth_values.end());
    const double lo = std::min(*plo, *tlo), hi = std::max(*phi, *thi);
    const auto hp = histogram(pred_values, lo, hi, bins);
    const auto ht = histogram(truth_values, lo, hi, bins);
    return order == KlOrder::truth_first ? kl_from_distributions(ht, hp) : kl_from_distributions(hp, ht);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::size_t kWeekSlots = kSlotsPerDay * kDaysPerWeek;
}

std::size_t HistoricalAverage::slot_of_week(const TimeStamp& t) {
    return static_cast<std::size_t>(t.day) * kSlotsPerDay + static_cast<std::size_t>(t.slot);
}

HistoricalAverage::HistoricalAverage(const TrafficDataset& ds, std::size_t train_end)
    : n_(ds.vertices), c_(ds.condition_count()) {
    if (train_end == 0 || train_end > ds.length()) throw ContractError("historical average needs a non-empty training range");
    const std::size_t frame = n_ * c_;
    slot_mean_.assign(kWeekSlots * frame, 0.0);
    seen_.assign(kWeekSlots, false);
    fallback_.assign(frame, 0.0);
    std::vector<std::size_t> counts(kWeekSlots, 0);
    for (std::size_t t = 0; t < train_end; ++t) {
        TimeStamp ts = time_stamp_of(ds.timestamps[t]);
        const std::size_t s = slot_of_week(ts);
        ++counts[s];
        for (std::size_t j = 0; j < frame; ++j) {
            const double v = ds.values[t * frame + j];
            slot_mean_[s * frame + j] += v;
            fallback_[j] += v;
        }
    }
    for (std::size_t s = 0; s < kWeekSlots; ++s) {
        if (!counts[s]) continue;
        seen_[s] = true;
        for (std::size_t j = 0; j < frame; ++j) slot_mean_[s * frame + j] /= static_cast<double>(counts[s]);
    }
    for (auto& f : fallback_) f /= static_cast<double>(train_end);
}

std::vector<double> HistoricalAverage::predict_stamp(const TrafficDataset& ds, std::size_t t) const {
    if (ds.vertices != n_ || ds.condition_count() != c_) throw DimensionError("historical average fitted on another shape");
    const std::size_t s = slot_of_week(time_stamp_of(ds.timestamps.at(t)));
    const std::size_t frame = n_ * c_;
    if (!seen_[s]) return fallback_;
    return {slot_mean_.begin() + static_cast<std::ptrdiff_t>(s * frame),
            slot_mean_.begin() + static_cast<std::ptrdiff_t>((s + 1) * frame)};
}

Tensor HistoricalAverage::predict(const TrafficDataset& ds, const SampleWindow& window) const {
    const std::size_t q = window.target.dim(0), p = window.input.dim(0);
    std::vector<double> out;
    out.reserve(q * n_ * c_);
    for (std::size_t i = 0; i < q; ++i) {
        const auto row = predict_stamp(ds, window.start + p + i);
        out.insert(out.end(), row.begin(), row.end());
    }
    return Tensor({q, n_, c_}, std::move(out));
}

}  // namespace gamcn
