#include "gamcn/gan.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gamcn/errors.hpp"

namespace gamcn {

Discriminator::Discriminator(const Options& options) : options_(options) {
    const std::size_t n = options.vertices, d = options.latent, q = options.horizon, h = options.hidden;
    if (n == 0 || d == 0 || q == 0 || h == 0 || options.conditions == 0) {
        throw ConfigError("discriminator needs positive vertices, conditions, horizon, latent and hidden sizes");
    }
    Rng rng(options.seed);
    mapper_ = TwoLayerMlp(options.conditions, h, d, rng);
    graph_.f_hat = init_learned_frequencies(n, rng);
    graph_.w.push_back(xavier_uniform(d, d, rng));
    graph_.layers = 1;
    head_rows_ = Linear(d, h, rng);
    head_out_ = Linear(q * n * h, 1, rng);
    if (options.zero_head) head_out_.weight = Tensor::zeros({q * n * h, 1}, true);

    mapper_.collect("disc.mapper", params_);
    params_.push_back({"disc.lpgcn.f_hat", graph_.f_hat});
    params_.push_back({"disc.lpgcn.w0", graph_.w[0]});
    head_rows_.collect("disc.head.0", params_);
    head_out_.collect("disc.head.1", params_);
}

Tensor Discriminator::logit(const Tensor& x_seq) const {
    const std::size_t q = options_.horizon, n = options_.vertices, c = options_.conditions, d = options_.latent;
    if (x_seq.rank() != 3 || x_seq.dim(0) != q || x_seq.dim(1) != n || x_seq.dim(2) != c) {
        throw ContractError("discriminator expects a [" + std::to_string(q) + " x " + std::to_string(n) + " x " +
                            std::to_string(c) + "] sequence, got " + shape_string(x_seq.shape()));
    }
    const Tensor mapped = reshape(mapper_(reshape(x_seq, {q * n, c})), {q, n, d});
    const Tensor conv = reshape(lpgcn_conv(mapped, graph_), {q * n, d});
    const Tensor rows = relu(head_rows_(conv));
    return reshape(head_out_(reshape(rows, {1, q * n * options_.hidden})), {1});
}

Tensor Discriminator::forward(const Tensor& x_seq) const { return sigmoid(logit(x_seq)); }

Tensor generator_loss(const Tensor& d_fake) {
    return mean(log(add_scalar(scale(clamp(d_fake, kGanClampLo, kGanClampHi), -1.0), 1.0)));
}

GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake) {
    GanLosses out;
    out.generator = generator_loss(d_fake);
    out.discriminator = scale(add(mean(log(clamp(d_real, kGanClampLo, kGanClampHi))), out.generator), -1.0);
    return out;
}

Tensor combined_generator_loss(const Tensor& mse, const Tensor& gen_loss, double lambda) {
    return add(scale(mse, lambda), gen_loss);
}

void GanConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("gan lambda must be a finite value >= 0");
    if (gen_epochs_per_disc == 0) throw ConfigError("gan_gen_epochs_per_disc must be >= 1");
    if (gen_epochs == 0) throw ConfigError("gan_epochs must be >= 1");
    if (!(disc_learning_rate > 0.0)) throw ConfigError("gan_disc_learning_rate must be positive");
    if (disc_latent == 0) throw ConfigError("gan_disc_latent must be >= 1");
}

namespace {

// Rethrows numeric failures with the name of the loss being computed.
template <typename F>
auto guarded(const char* loss_name, F&& f) {
    try {
        return f();
    } catch (const NumericError& e) {
        throw NumericError(std::string(loss_name) + " became non-finite: " + e.what());
    }
}

}  // namespace

GanResult gan_train(Gamcn& model, Discriminator& disc, const std::vector<SampleWindow>& train_windows,
                    const std::vector<SampleWindow>& val_windows, const TrainConfig& train_config,
                    const GanConfig& gan_config, std::ostream* history) {
    train_config.validate();
    gan_config.validate();
    if (train_windows.empty()) throw ConfigError("training split has no windows");
    if (val_windows.empty()) throw ConfigError("validation split has no windows");
    for (const auto& w : train_windows) {
        if (w.split != Split::train) throw ContractError("training list contains a window tagged " + to_string(w.split));
    }
    if (disc.options().horizon != model.config().q || disc.options().vertices != model.config().vertices) {
        throw ConfigError("discriminator shape does not match the generator's horizon and vertex count");
    }

    auto& gen_params = model.parameters();
    auto& disc_params = disc.parameters();
    Adam gen_adam(gen_params, train_config.adam());
    AdamConfig disc_cfg = train_config.adam();
    disc_cfg.learning_rate = gan_config.disc_learning_rate;
    Adam disc_adam(disc_params, disc_cfg);
    Trainer evaluator(model, train_config);

    GanResult result;
    double best_val = std::numeric_limits<double>::infinity();
    auto best = snapshot(gen_params);
    const std::size_t bs = train_config.batch_size;

    std::size_t disc_epoch = 0;
    for (std::size_t epoch = 1; epoch <= gan_config.gen_epochs; ++epoch) {
        // Generator epoch.
        {
            const auto started = std::chrono::steady_clock::now();
            ScheduleEntry entry{"gen", epoch, fingerprint(gen_params), 0, fingerprint(disc_params), 0};
            const auto order = epoch_order(train_windows.size(), train_config.seed, epoch);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t b = 0; b < order.size(); b += bs) {
                const std::size_t end = std::min(order.size(), b + bs);
                const double inv = 1.0 / static_cast<double>(end - b);
                zero_grads(gen_params);
                double batch_loss = 0.0;
                for (std::size_t k = b; k < end; ++k) {
                    const auto& w = train_windows[order[k]];
                    const Tensor loss = guarded("generator loss", [&] {
                        const Tensor pred = model.forward(w.input, w.horizon_times);
                        const Tensor gen = generator_loss(disc.forward(pred));
                        return combined_generator_loss(mse_loss(pred, w.target), gen, gan_config.lambda);
                    });
                    batch_loss += loss.item();
                    backward(scale(loss, inv));
                }
                gen_adam.step();
                loss_sum += batch_loss * inv;
                ++batches;
            }
            EpochRecord rec;
            rec.epoch = epoch;
            rec.phase = "gen";
            rec.train_loss = loss_sum / static_cast<double>(batches);
            rec.val_loss = evaluator.evaluate(val_windows);
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            entry.generator_after = fingerprint(gen_params);
            entry.discriminator_after = fingerprint(disc_params);
            result.schedule.push_back(entry);
            result.history.push_back(rec);
            if (history) write_history_line(*history, rec);
            if (rec.val_loss < best_val) {
                best_val = rec.val_loss;
                best = snapshot(gen_params);
                result.best_gen_epoch = epoch;
            }
        }
        if (epoch % gan_config.gen_epochs_per_disc != 0) continue;

        // Discriminator epoch on detached predictions.
        ++disc_epoch;
        const auto started = std::chrono::steady_clock::now();
        ScheduleEntry entry{"disc", disc_epoch, fingerprint(gen_params), 0, fingerprint(disc_params), 0};
        const auto order = epoch_order(train_windows.size(), train_config.seed ^ 0x9e3779b97f4a7c15ULL, disc_epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += bs) {
            const std::size_t end = std::min(order.size(), b + bs);
            const double inv = 1.0 / static_cast<double>(end - b);
            zero_grads(disc_params);
            double batch_loss = 0.0;
            for (std::size_t k = b; k < end; ++k) {
                const auto& w = train_windows[order[k]];
                const Tensor fake = predict(model, w);
                const Tensor loss = guarded("discriminator loss", [&] {
                    return gan_losses(disc.forward(w.target), disc.forward(fake)).discriminator;
                });
                batch_loss += loss.item();
                backward(scale(loss, inv));
            }
            disc_adam.step();
            loss_sum += batch_loss * inv;
            ++batches;
        }
        double val_disc = 0.0;
        {
            NoGradGuard guard;
            for (const auto& w : val_windows) {
                val_disc += gan_losses(disc.forward(w.target), disc.forward(model.forward(w.input, w.horizon_times)))
                                .discriminator.item();
            }
        }
        EpochRecord rec;
        rec.epoch = disc_epoch;
        rec.phase = "disc";
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.val_loss = val_disc / static_cast<double>(val_windows.size());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        entry.generator_after = fingerprint(gen_params);
        entry.discriminator_after = fingerprint(disc_params);
        result.schedule.push_back(entry);
        result.history.push_back(rec);
        if (history) write_history_line(*history, rec);
    }
    restore(gen_params, best);
    return result;
}

}  // namespace gamcn
