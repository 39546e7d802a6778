#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gamcn/data.hpp"
#include "gamcn/tensor.hpp"

namespace gamcn {

inline constexpr double kMapeFloor = 1e-6;

/// Error statistics over one horizon step, or over all steps when
/// `horizon` is 0.
struct BucketMetrics {
    std::size_t horizon = 0;   ///< 1-based horizon step in dataset intervals
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;         ///< percent, over entries with |truth| >= 1e-6
    std::size_t count = 0;
    std::size_t mape_skipped = 0;
};

struct MetricReport {
    std::vector<BucketMetrics> buckets;
    BucketMetrics overall;
    std::size_t samples = 0;
    std::optional<double> kl;
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Accumulates q x n x c prediction/truth pairs in original units.
class MetricAccumulator {
public:
    /// `buckets` are 1-based horizon steps; each must be <= q.
    MetricAccumulator(std::size_t q, std::vector<std::size_t> buckets);

    void add(const Tensor& pred, const Tensor& truth);
    MetricReport finish() const;

private:
    struct Sums {
        double abs = 0.0, sq = 0.0, pct = 0.0;
        std::size_t count = 0, pct_count = 0, skipped = 0;
    };
    BucketMetrics summarize(const Sums& s, std::size_t horizon) const;

    std::size_t q_;
    std::vector<std::size_t> buckets_;
    std::vector<Sums> per_step_;
    std::size_t samples_ = 0;
};

MetricReport compute_metrics(const Tensor& pred, const Tensor& truth, const std::vector<std::size_t>& buckets);

enum class KlOrder {
    truth_first,  ///< KL(truth || prediction)
    pred_first,   ///< KL(prediction || truth)
};

std::string to_string(KlOrder o);
KlOrder parse_kl_order(const std::string& name);

inline constexpr double kKlSmoothing = 1e-9;

/// Normalized histogram of `values` over [lo, hi] with equal-width bins;
/// the top edge is inclusive.
std::vector<double> histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

/// sum P log(P / Q), natural log. Zero Q bins receive `smoothing` mass and
/// Q is renormalized; zero P bins contribute nothing.
double kl_from_distributions(std::span<const double> p, std::span<const double> q, double smoothing = kKlSmoothing);

/// Shared binning over the pooled min-max of both value sets. Throws
/// ContractError when either set is empty.
double kl_divergence(std::span<const double> pred_values, std::span<const double> truth_values, std::size_t bins = 50,
                     KlOrder order = KlOrder::truth_first);

/// Per (vertex, condition, slot of week) mean over the training stamps;
/// slots never observed fall back to the vertex mean.
class HistoricalAverage {
public:
    HistoricalAverage(const TrafficDataset& ds, std::size_t train_end);

    /// Prediction for stamp index `t` of `ds` as an n x c row.
    std::vector<double> predict_stamp(const TrafficDataset& ds, std::size_t t) const;
    /// [q x n x c] for the targets of a window.
    Tensor predict(const TrafficDataset& ds, const SampleWindow& window) const;

    static std::size_t slot_of_week(const TimeStamp& t);

private:
    std::size_t n_;
    std::size_t c_;
    std::vector<double> slot_mean_;  ///< [week slots x n x c]
    std::vector<bool> seen_;         ///< [week slots]
    std::vector<double> fallback_;   ///< [n x c]
};

}  // namespace gamcn
