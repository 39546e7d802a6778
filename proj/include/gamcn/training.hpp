#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gamcn/data.hpp"
#include "gamcn/model.hpp"

namespace gamcn {

/// Per-condition z-score statistics fitted on the training stamps only.
struct Normalizer {
    std::vector<double> mu;
    std::vector<double> sigma;  ///< population standard deviation; 0 replaced by 1

    /// `values` is laid out [... x c]; throws ContractError when empty.
    static Normalizer fit(std::span<const double> values, std::size_t conditions);
    /// Fits on stamps [0, train_end) of the dataset.
    static Normalizer fit(const TrafficDataset& ds, std::size_t train_end);

    std::size_t conditions() const { return mu.size(); }
    void apply(std::span<double> values) const;
    void invert(std::span<double> values) const;
    Tensor apply(const Tensor& t) const;
    Tensor invert(const Tensor& t) const;
};

/// Normalized copies of input and target; split tags are preserved.
std::vector<SampleWindow> normalize_windows(const std::vector<SampleWindow>& windows, const Normalizer& norm);

/// Mean of squared differences over all q*n*c entries.
Tensor mse_loss(const Tensor& pred, const Tensor& truth);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moments are allocated lazily and keep the parameter shapes.
class Adam {
public:
    Adam(ParameterList& params, AdamConfig config);

    /// One bias-corrected update from the accumulated gradients. Parameters
    /// without a gradient are treated as having a zero gradient. Throws
    /// NumericError naming the parameter if a gradient is not finite.
    void step();
    std::size_t steps() const { return step_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

private:
    ParameterList* params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t step_ = 0;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 4;
    std::size_t max_epochs = 20;
    std::size_t patience = 3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;  ///< batch shuffling
    std::size_t max_steps = 0;  ///< 0 means unlimited

    AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
    std::string phase = "train";
};

/// One JSON object per line.
void write_history_line(std::ostream& out, const EpochRecord& record);

struct TrainHooks {
    /// Called after every optimizer step with the 1-based step and batch loss.
    std::function<void(std::size_t step, double loss)> on_step;
    /// Replaces the early-stopping metric; receives the epoch and the
    /// measured validation loss.
    std::function<double(std::size_t epoch, double val_loss)> validation_metric;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::size_t steps = 0;
    bool stopped_early = false;
};

/// Mini-batch MSE optimizer over train-split windows in normalized units.
class Trainer {
public:
    Trainer(Gamcn& model, const TrainConfig& config);

    /// Per-sample backward with the loss scaled by 1/B, then one Adam step.
    /// Returns the batch mean loss. Throws ContractError for a window that is
    /// not tagged train.
    double step(std::span<const SampleWindow* const> batch);
    /// Mean per-window MSE without gradient bookkeeping.
    double evaluate(const std::vector<SampleWindow>& windows) const;

    Adam& optimizer() { return adam_; }
    Gamcn& model() { return *model_; }

private:
    Gamcn* model_;
    TrainConfig config_;
    Adam adam_;
};

/// Shuffled mini-batches, validation after each epoch, early stopping after
/// `patience` epochs without strict improvement; the best-validation
/// parameters are restored before returning.
TrainResult train(Gamcn& model, const std::vector<SampleWindow>& train_windows,
                  const std::vector<SampleWindow>& val_windows, const TrainConfig& config, const TrainHooks& hooks = {},
                  std::ostream* history = nullptr);

/// Forward pass with the model's parameters excluded from the graph.
Tensor predict(const Gamcn& model, const SampleWindow& window);

/// Deterministic epoch order for a given seed and epoch.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch);

}  // namespace gamcn
