#pragma once

// Shared plumbing between the command-line tool and the acceptance suite.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gamcn/config.hpp"
#include "gamcn/data.hpp"
#include "gamcn/gan.hpp"
#include "gamcn/metrics.hpp"
#include "gamcn/model.hpp"
#include "gamcn/training.hpp"

namespace gamcn {

/// Raw windows plus their normalized copies; the normalizer sees train
/// stamps only.
struct PreparedData {
    WindowSet raw;
    Normalizer normalizer;
    std::vector<SampleWindow> train;
    std::vector<SampleWindow> val;
    std::vector<SampleWindow> test;
};

PreparedData prepare_data(const TrafficDataset& ds, std::size_t p, std::size_t q);

/// Copies the model section and fills vertices/conditions from the data.
ModelConfig resolve_model_config(const RunConfig& config, const TrafficDataset& ds);

/// Applies an ablation name (full, no_spatial, no_temporal, attention_off)
/// or a spatial variant name (gcn, dgcn, pgcn, lpgcn, lpgcn_a).
ModelConfig apply_variant(ModelConfig config, const std::string& variant);

struct FitResult {
    Gamcn model;
    TrainResult train;
    std::optional<GanResult> gan;
};

/// Pure-MSE training, or the adversarial schedule when `gan` is set.
FitResult fit_model(const TrafficDataset& ds, const PreparedData& data, const RunConfig& config, bool gan,
                    std::ostream* history = nullptr);

/// Predictions in original units for each normalized window.
std::vector<Tensor> predict_windows(const Gamcn& model, const Normalizer& norm, const std::vector<SampleWindow>& windows);

/// Metrics of `predictions` against the raw targets; KL over all pooled
/// values when `with_kl`.
MetricReport score_predictions(const std::vector<Tensor>& predictions, const std::vector<SampleWindow>& raw,
                               const EvalConfig& eval, bool with_kl);

MetricReport evaluate_model(const Gamcn& model, const PreparedData& data, const EvalConfig& eval, bool with_kl);
MetricReport evaluate_baseline(const TrafficDataset& ds, const PreparedData& data, const EvalConfig& eval, bool with_kl);

/// `timestamp,horizon,v0,...` rows, one per (window, horizon step).
void write_predictions_csv(std::ostream& out, const TrafficDataset& ds, const std::vector<SampleWindow>& raw,
                           const std::vector<Tensor>& predictions);

}  // namespace gamcn
