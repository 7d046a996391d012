#include "qcpd/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include <json.hpp>

#include "qcpd/error.hpp"

namespace qcpd {

using nlohmann::json;

namespace {

void check_symmetric(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw ValidationError("DenseAutoencoder: need at least 2 layer sizes");
    if (sizes.front() != sizes.back())
        throw ValidationError("DenseAutoencoder: input and output sizes must match");
    for (size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1) throw ValidationError("DenseAutoencoder: layer sizes must be >= 1");
        if (sizes[i] != sizes[sizes.size() - 1 - i])
            throw ValidationError("DenseAutoencoder: layer sizes must be symmetric about the bottleneck");
    }
}

}  // namespace

DenseAutoencoder::DenseAutoencoder(std::vector<int> layer_sizes, double dropout_rate,
                                   uint64_t init_seed)
    : layer_sizes_(std::move(layer_sizes)), dropout_(dropout_rate) {
    check_symmetric(layer_sizes_);
    if (dropout_ < 0.0 || dropout_ >= 1.0)
        throw ValidationError("DenseAutoencoder: dropout must be in [0, 1)");

    Rng rng(init_seed);
    for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const int in = layer_sizes_[l];
        const int out = layer_sizes_[l + 1];
        // Kaiming-uniform, fan-in scaling.
        const double bound = std::sqrt(6.0 / static_cast<double>(in));
        Eigen::MatrixXd w(out, in);
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-bound, bound);
        weights_.push_back(std::move(w));
        biases_.push_back(Eigen::VectorXd::Zero(out));
    }
}

DenseAutoencoder::DenseAutoencoder(std::vector<int> layer_sizes, double dropout_rate,
                                   std::vector<Eigen::MatrixXd> weights,
                                   std::vector<Eigen::VectorXd> biases)
    : layer_sizes_(std::move(layer_sizes)),
      dropout_(dropout_rate),
      weights_(std::move(weights)),
      biases_(std::move(biases)) {
    check_symmetric(layer_sizes_);
    if (weights_.size() != layer_sizes_.size() - 1 || biases_.size() != weights_.size())
        throw ValidationError("DenseAutoencoder: layer count mismatch");
    for (size_t l = 0; l < weights_.size(); ++l)
        if (weights_[l].rows() != layer_sizes_[l + 1] || weights_[l].cols() != layer_sizes_[l] ||
            biases_[l].size() != layer_sizes_[l + 1])
            throw ValidationError("DenseAutoencoder: weight shape inconsistent with layer_sizes");
}

Eigen::VectorXd DenseAutoencoder::forward(const Eigen::VectorXd& input) const {
    return forward(input, false, nullptr);
}

Eigen::VectorXd DenseAutoencoder::forward(const Eigen::VectorXd& input, bool training,
                                          Rng* rng) const {
    if (input.size() != input_size())
        throw ValidationError("forward: input length mismatch");
    if (training && dropout_ > 0.0 && rng == nullptr)
        throw ValidationError("forward: training mode with dropout needs an RNG");

    Eigen::VectorXd a = input;
    const int L = layers();
    for (int l = 0; l < L; ++l) {
        Eigen::VectorXd z = weights_[l] * a + biases_[l];
        if (l + 1 < L) {
            a = z.cwiseMax(0.0);
            if (training && dropout_ > 0.0) {
                const double keep = 1.0 - dropout_;
                for (Eigen::Index i = 0; i < a.size(); ++i)
                    a[i] = rng->uniform01() < dropout_ ? 0.0 : a[i] / keep;
            }
        } else {
            a = std::move(z);
        }
    }
    return a;
}

Eigen::MatrixXd DenseAutoencoder::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_size())
        throw ValidationError("forward_batch: input length mismatch");
    Eigen::MatrixXd a = inputs;
    const int L = layers();
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
        a = (l + 1 < L) ? z.cwiseMax(0.0).eval() : std::move(z);
    }
    return a;
}

double loss_mse(const DenseAutoencoder& model, const Eigen::MatrixXd& batch) {
    if (batch.cols() == 0) throw ValidationError("loss_mse: empty batch");
    const Eigen::MatrixXd out = model.forward_batch(batch);
    const double denom = static_cast<double>(batch.rows()) * static_cast<double>(batch.cols());
    return (out - batch).squaredNorm() / denom;
}

void TrainConfig::validate() const {
    if (!(lr_floor > 0.0) || lr_floor > lr_init)
        throw ValidationError("TrainConfig: need 0 < lr_floor <= lr_init");
    if (!(lr_factor > 0.0) || lr_factor >= 1.0)
        throw ValidationError("TrainConfig: lr_factor must be in (0, 1)");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ValidationError("TrainConfig: dropout must be in [0, 1)");
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
        throw ValidationError("TrainConfig: val_fraction must be in (0, 1)");
    if (max_epochs < 1 || batch_size < 1 || plateau_patience < 1 || early_stop_patience < 1)
        throw ValidationError("TrainConfig: counts must be >= 1");
}

// Batched forward/backward plus Adam state for one training run.
struct AdamTrainer {
    explicit AdamTrainer(DenseAutoencoder& m) : model(m) {
        for (int l = 0; l < model.layers(); ++l) {
            mw.push_back(Eigen::MatrixXd::Zero(model.weights_[l].rows(), model.weights_[l].cols()));
            vw.push_back(Eigen::MatrixXd::Zero(model.weights_[l].rows(), model.weights_[l].cols()));
            mb.push_back(Eigen::VectorXd::Zero(model.biases_[l].size()));
            vb.push_back(Eigen::VectorXd::Zero(model.biases_[l].size()));
        }
    }

    // One minibatch step; returns the batch loss (with dropout active).
    double step(const Eigen::MatrixXd& batch, double lr, Rng& dropout_rng) {
        const int L = model.layers();
        const double keep = 1.0 - model.dropout_;
        const double denom = static_cast<double>(batch.rows()) * static_cast<double>(batch.cols());

        std::vector<Eigen::MatrixXd> acts(L + 1);  // post-activation, post-dropout
        std::vector<Eigen::MatrixXd> pre(L);       // pre-activation
        std::vector<Eigen::MatrixXd> masks(L);     // dropout scale per element
        acts[0] = batch;
        for (int l = 0; l < L; ++l) {
            pre[l] = (model.weights_[l] * acts[l]).colwise() + model.biases_[l];
            if (l + 1 < L) {
                Eigen::MatrixXd a = pre[l].cwiseMax(0.0);
                if (model.dropout_ > 0.0) {
                    masks[l].resize(a.rows(), a.cols());
                    for (Eigen::Index j = 0; j < a.cols(); ++j)
                        for (Eigen::Index i = 0; i < a.rows(); ++i)
                            masks[l](i, j) = dropout_rng.uniform01() < model.dropout_ ? 0.0 : 1.0 / keep;
                    a = a.cwiseProduct(masks[l]);
                }
                acts[l + 1] = std::move(a);
            } else {
                acts[l + 1] = pre[l];
            }
        }

        const double loss = (acts[L] - batch).squaredNorm() / denom;
        if (!std::isfinite(loss))
            throw NumericError("train_autoencoder: non-finite loss; aborting");

        Eigen::MatrixXd delta = 2.0 * (acts[L] - batch) / denom;  // dLoss/dZ_L
        ++t_step;
        const double bc1 = 1.0 - std::pow(beta1, t_step);
        const double bc2 = 1.0 - std::pow(beta2, t_step);
        for (int l = L - 1; l >= 0; --l) {
            const Eigen::MatrixXd grad_w = delta * acts[l].transpose();
            const Eigen::VectorXd grad_b = delta.rowwise().sum();
            if (l > 0) {
                Eigen::MatrixXd da = model.weights_[l].transpose() * delta;
                if (model.dropout_ > 0.0) da = da.cwiseProduct(masks[l - 1]);
                delta = da.cwiseProduct(
                    (pre[l - 1].array() > 0.0).cast<double>().matrix());
            }
            adam_update(mw[l], vw[l], grad_w, model.weights_[l], lr, bc1, bc2);
            adam_update(mb[l], vb[l], grad_b, model.biases_[l], lr, bc1, bc2);
        }
        return loss;
    }

    template <typename M, typename G>
    void adam_update(M& m, M& v, const G& grad, M& param, double lr, double bc1, double bc2) {
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v.array().matrix() + (1.0 - beta2) * grad.array().square().matrix();
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }

    DenseAutoencoder& model;
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    long t_step = 0;
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;
};

TrainResult train_autoencoder(const DenseAutoencoder& init, const Eigen::MatrixXd& windows,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (windows.cols() < 2) throw ValidationError("train_autoencoder: need at least 2 windows");
    if (windows.rows() != init.input_size())
        throw ValidationError("train_autoencoder: window length mismatch");

    const Rng base(cfg.seed);
    Rng split_rng = base.substream(1);
    Rng shuffle_rng = base.substream(2);
    Rng dropout_rng = base.substream(3);

    // Seeded random split; the tail after shuffling is validation.
    const Eigen::Index n = windows.cols();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.below(static_cast<uint64_t>(i + 1))]);
    Eigen::Index n_val = static_cast<Eigen::Index>(std::llround(cfg.val_fraction * n));
    n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
    const Eigen::Index n_train = n - n_val;

    Eigen::MatrixXd train_set(windows.rows(), n_train), val_set(windows.rows(), n_val);
    for (Eigen::Index i = 0; i < n_train; ++i) train_set.col(i) = windows.col(order[i]);
    for (Eigen::Index i = 0; i < n_val; ++i) val_set.col(i) = windows.col(order[n_train + i]);

    DenseAutoencoder model = init;
    AdamTrainer trainer(model);
    TrainReport report;

    double lr = cfg.lr_init;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> best_w = model.weights();
    std::vector<Eigen::VectorXd> best_b = model.biases();
    int plateau_count = 0;
    int early_count = 0;

    std::vector<Eigen::Index> idx(n_train);
    std::iota(idx.begin(), idx.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (Eigen::Index i = n_train - 1; i > 0; --i)
            std::swap(idx[i], idx[shuffle_rng.below(static_cast<uint64_t>(i + 1))]);

        double loss_sum = 0.0;
        int n_batches = 0;
        for (Eigen::Index start = 0; start < n_train; start += cfg.batch_size) {
            const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, n_train - start);
            Eigen::MatrixXd batch(windows.rows(), bsz);
            for (Eigen::Index i = 0; i < bsz; ++i) batch.col(i) = train_set.col(idx[start + i]);
            loss_sum += trainer.step(batch, lr, dropout_rng);
            ++n_batches;
        }

        const double val = loss_mse(model, val_set);
        if (!std::isfinite(val))
            throw NumericError("train_autoencoder: non-finite validation loss");
        report.train_loss.push_back(loss_sum / n_batches);
        report.val_loss.push_back(val);
        report.lr_used.push_back(lr);
        report.epochs_run = epoch;

        if (best_val - val > 1e-8) {
            best_val = val;
            best_w = model.weights();
            best_b = model.biases();
            report.best_epoch = epoch;
            plateau_count = 0;
            early_count = 0;
        } else {
            ++plateau_count;
            ++early_count;
            if (plateau_count >= cfg.plateau_patience)
                lr = std::max(lr * cfg.lr_factor, cfg.lr_floor);
            if (early_count >= cfg.early_stop_patience) {
                report.stopped_early = true;
                break;
            }
        }
    }

    report.final_lr = lr;
    DenseAutoencoder best(model.layer_sizes(), model.dropout_rate(), std::move(best_w),
                          std::move(best_b));
    return TrainResult{std::move(best), std::move(report)};
}

void loss_gradients(const DenseAutoencoder& model, const Eigen::MatrixXd& batch,
                    std::vector<Eigen::MatrixXd>* grad_w, std::vector<Eigen::VectorXd>* grad_b) {
    if (batch.cols() == 0) throw ValidationError("loss_gradients: empty batch");
    const int L = model.layers();
    const double denom = static_cast<double>(batch.rows()) * static_cast<double>(batch.cols());

    std::vector<Eigen::MatrixXd> acts(L + 1);
    std::vector<Eigen::MatrixXd> pre(L);
    acts[0] = batch;
    for (int l = 0; l < L; ++l) {
        pre[l] = (model.weights()[l] * acts[l]).colwise() + model.biases()[l];
        acts[l + 1] = (l + 1 < L) ? pre[l].cwiseMax(0.0).eval() : pre[l];
    }

    grad_w->assign(L, {});
    grad_b->assign(L, {});
    Eigen::MatrixXd delta = 2.0 * (acts[L] - batch) / denom;
    for (int l = L - 1; l >= 0; --l) {
        (*grad_w)[l] = delta * acts[l].transpose();
        (*grad_b)[l] = delta.rowwise().sum();
        if (l > 0)
            delta = (model.weights()[l].transpose() * delta)
                        .cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
}

TrainResult train_grid_search(const Eigen::MatrixXd& windows, const TrainConfig& cfg) {
    const int d = static_cast<int>(windows.rows());
    std::optional<TrainResult> best;
    double best_val = std::numeric_limits<double>::infinity();
    for (const int bottleneck : {16, 32, 64}) {
        for (const int hidden : {64, 128, 256}) {
            if (bottleneck > hidden || bottleneck >= d) continue;
            DenseAutoencoder init({d, hidden, bottleneck, hidden, d}, cfg.dropout, cfg.seed);
            TrainResult result = train_autoencoder(init, windows, cfg);
            const double val = result.report.val_loss[result.report.best_epoch - 1];
            if (val < best_val) {
                best_val = val;
                best = std::move(result);
            }
        }
    }
    if (!best) throw ValidationError("train_grid_search: no architecture fits the input size");
    return std::move(*best);
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    const Eigen::Index r = rows.size();
    const Eigen::Index c = r > 0 ? rows[0].size() : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

constexpr int kModelVersion = 1;

}  // namespace

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
    json doc;
    doc["format"] = "qcpd-model";
    doc["version"] = kModelVersion;
    doc["layer_sizes"] = bundle.model.layer_sizes();
    doc["dropout_rate"] = bundle.model.dropout_rate();
    doc["window"] = bundle.window;
    json weights = json::array(), biases = json::array();
    for (const auto& w : bundle.model.weights()) weights.push_back(matrix_to_json(w));
    for (const auto& b : bundle.model.biases()) {
        json vec = json::array();
        for (Eigen::Index i = 0; i < b.size(); ++i) vec.push_back(b[i]);
        biases.push_back(std::move(vec));
    }
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);
    json mu = json::array(), sigma = json::array();
    for (Eigen::Index i = 0; i < bundle.stats.mu.size(); ++i) mu.push_back(bundle.stats.mu[i]);
    for (Eigen::Index i = 0; i < bundle.stats.sigma.size(); ++i)
        sigma.push_back(bundle.stats.sigma[i]);
    doc["norm_stats"] = {{"mu", std::move(mu)}, {"sigma", std::move(sigma)}};

    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write model file " + path.string());
    f << doc.dump() << "\n";
}

ModelBundle load_model(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open model file " + path.string());
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": corrupt model file (" + e.what() + ")");
    }
    if (!doc.contains("format") || doc["format"] != "qcpd-model")
        throw ValidationError(path.string() + ": not a qcpd model file");
    if (!doc.contains("version") || doc["version"].get<int>() != kModelVersion)
        throw ValidationError(path.string() + ": unsupported model version");

    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    for (const auto& w : doc["weights"]) weights.push_back(matrix_from_json(w));
    for (const auto& b : doc["biases"]) {
        Eigen::VectorXd vec(b.size());
        for (Eigen::Index i = 0; i < vec.size(); ++i) vec[i] = b[i].get<double>();
        biases.push_back(std::move(vec));
    }

    NormStats stats;
    const auto& ns = doc["norm_stats"];
    stats.mu.resize(ns["mu"].size());
    stats.sigma.resize(ns["sigma"].size());
    for (Eigen::Index i = 0; i < stats.mu.size(); ++i) stats.mu[i] = ns["mu"][i].get<double>();
    for (Eigen::Index i = 0; i < stats.sigma.size(); ++i)
        stats.sigma[i] = ns["sigma"][i].get<double>();

    DenseAutoencoder model(doc["layer_sizes"].get<std::vector<int>>(),
                           doc["dropout_rate"].get<double>(), std::move(weights),
                           std::move(biases));
    return ModelBundle{std::move(model), std::move(stats), doc["window"].get<int>()};
}

}  // namespace qcpd
