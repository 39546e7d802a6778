#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gamcn/spatial.hpp"
#include "gamcn/training.hpp"

namespace gamcn {

/// Scores a q-step sequence: per-step mapper to n x d, a learned-PMI graph
/// convolution with its own frequencies, then two linear layers over the
/// concatenated q*n x d matrix and a sigmoid.
class Discriminator {
public:
    struct Options {
        std::size_t vertices = 0;
        std::size_t conditions = 1;
        std::size_t horizon = 0;  ///< q
        std::size_t latent = 16;
        std::size_t hidden = 10;
        std::uint64_t seed = 1;
        /// Zero the final layer so the first score is exactly 0.5 for any
        /// input and the generator sees no adversarial gradient until the
        /// discriminator has trained.
        bool zero_head = true;
    };

    explicit Discriminator(const Options& options);

    /// x_seq [q x n x c] -> [1] probability in (0, 1).
    Tensor forward(const Tensor& x_seq) const;
    /// Pre-sigmoid score.
    Tensor logit(const Tensor& x_seq) const;

    ParameterList& parameters() { return params_; }
    const ParameterList& parameters() const { return params_; }
    const Options& options() const { return options_; }

private:
    Options options_;
    TwoLayerMlp mapper_;
    LpgcnParams graph_;
    Linear head_rows_;  ///< d -> hidden on every row of the q*n x d matrix
    Linear head_out_;   ///< q*n*hidden -> 1
    ParameterList params_;
};

inline constexpr double kGanClampLo = 1e-7;
inline constexpr double kGanClampHi = 1.0 - 1e-7;

struct GanLosses {
    Tensor generator;      ///< log(1 - D(fake))
    Tensor discriminator;  ///< -(log D(real) + log(1 - D(fake)))
};

/// mean log(1 - D(fake)) with the clamped score.
Tensor generator_loss(const Tensor& d_fake);

/// Scores are clamped into [1e-7, 1 - 1e-7] before the logs.
GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake);

/// lambda * MSE + log(1 - D(fake)).
Tensor combined_generator_loss(const Tensor& mse, const Tensor& gen_loss, double lambda);

struct GanConfig {
    double lambda = 0.01;
    std::size_t gen_epochs_per_disc = 5;
    std::size_t gen_epochs = 20;
    double disc_learning_rate = 1e-4;
    std::size_t disc_latent = 16;
    bool disc_zero_head = true;

    void validate() const;
};

struct ScheduleEntry {
    std::string phase;       ///< "gen" or "disc"
    std::size_t epoch = 0;   ///< 1-based within the phase
    std::uint64_t generator_before = 0;
    std::uint64_t generator_after = 0;
    std::uint64_t discriminator_before = 0;
    std::uint64_t discriminator_after = 0;
};

struct GanResult {
    std::vector<ScheduleEntry> schedule;
    std::vector<EpochRecord> history;
    std::size_t best_gen_epoch = 0;  ///< generator epoch whose parameters were kept
};

/// Generator epochs minimize the combined loss and update only the model;
/// after every `gen_epochs_per_disc` generator epochs one discriminator epoch
/// minimizes the discriminator loss on detached predictions. Each side has
/// its own Adam state. The generator parameters with the lowest validation
/// MSE are restored at the end.
GanResult gan_train(Gamcn& model, Discriminator& disc, const std::vector<SampleWindow>& train_windows,
                    const std::vector<SampleWindow>& val_windows, const TrainConfig& train_config,
                    const GanConfig& gan_config, std::ostream* history = nullptr);

}  // namespace gamcn
