#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "qcpd/preprocess.hpp"
#include "qcpd/rng.hpp"

namespace qcpd {

// Fully connected autoencoder: ReLU hidden layers, identity output layer,
// inverted dropout after each hidden activation in training mode.
// layer_sizes must be symmetric about the bottleneck with first == last.
class DenseAutoencoder {
public:
    DenseAutoencoder(std::vector<int> layer_sizes, double dropout_rate, uint64_t init_seed);

    // Deserialization constructor; takes weights as-is.
    DenseAutoencoder(std::vector<int> layer_sizes, double dropout_rate,
                     std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases);

    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    double dropout_rate() const { return dropout_; }
    int input_size() const { return layer_sizes_.front(); }
    int layers() const { return static_cast<int>(weights_.size()); }

    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

    // Inference-mode forward pass (deterministic, dropout off).
    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    // Training-mode forward pass with dropout masks drawn from rng.
    Eigen::VectorXd forward(const Eigen::VectorXd& input, bool training, Rng* rng) const;

    // Batched inference forward; columns are samples.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

private:
    friend struct AdamTrainer;
    std::vector<int> layer_sizes_;
    double dropout_ = 0.0;
    std::vector<Eigen::MatrixXd> weights_;  // weights_[l]: (out x in)
    std::vector<Eigen::VectorXd> biases_;
};

// Mean over batch columns and all output coordinates of the squared
// reconstruction error, dropout off.
double loss_mse(const DenseAutoencoder& model, const Eigen::MatrixXd& batch);

struct TrainConfig {
    double lr_init = 1e-4;
    double lr_floor = 1e-6;
    double lr_factor = 0.5;
    int plateau_patience = 5;
    int early_stop_patience = 5;
    int max_epochs = 20;
    int batch_size = 512;
    double dropout = 0.1;
    double val_fraction = 0.1;
    uint64_t seed = 0;

    void validate() const;
};

struct TrainReport {
    int epochs_run = 0;
    std::vector<double> train_loss;  // mean minibatch loss per epoch
    std::vector<double> val_loss;    // per epoch, dropout off
    std::vector<double> lr_used;     // learning rate in effect during each epoch
    double final_lr = 0.0;
    bool stopped_early = false;
    int best_epoch = 0;  // 1-based epoch whose weights were returned
};

struct TrainResult {
    DenseAutoencoder model;
    TrainReport report;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on shuffled minibatches with a
// seeded train/validation split. Validation loss that fails to improve by
// more than 1e-8 counts against both patience counters: once the plateau
// counter reaches plateau_patience the learning rate halves each further
// non-improving epoch (floored at lr_floor), and early_stop_patience
// non-improving epochs end training. Returns the best-validation weights.
// `windows` holds one flattened window per column.
TrainResult train_autoencoder(const DenseAutoencoder& init, const Eigen::MatrixXd& windows,
                              const TrainConfig& cfg);

// Analytic gradients of loss_mse for gradient checking; dropout off.
// Returned in layer order: d(loss)/dW_l, d(loss)/db_l.
void loss_gradients(const DenseAutoencoder& model, const Eigen::MatrixXd& batch,
                    std::vector<Eigen::MatrixXd>* grad_w, std::vector<Eigen::VectorXd>* grad_b);

// Grid search over bottleneck {16, 32, 64} x hidden {64, 128, 256}; picks the
// lowest validation loss. Sizes larger than the input are skipped.
TrainResult train_grid_search(const Eigen::MatrixXd& windows, const TrainConfig& cfg);

// Model artifact bundling the network with the training normalization stats
// and window length, so scoring always uses the training-time representation.
struct ModelBundle {
    DenseAutoencoder model;
    NormStats stats;
    int window = 0;
};

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace qcpd
