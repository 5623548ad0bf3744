#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mwrl {

struct NetConfig {
    int grid = 32;
    int svec = 202;
    int actions = 4;
    int conv1 = 8;
    int conv2 = 16;
    int f1_out = 64;
    int f2_hidden1 = 512;
    int f2_hidden2 = 256;
    int head_hidden = 64;
    bool operator==(const NetConfig&) const = default;
};

// Parameter block order; biases are single-column matrices.
enum Block : int {
    kConv1W, kConv1B, kConv2W, kConv2B, kF1W, kF1B,
    kF2aW, kF2aB, kF2bW, kF2bB,
    kActorW1, kActorB1, kActorW2, kActorB2,
    kCriticW1, kCriticB1, kCriticW2, kCriticB2,
    kBlockCount
};

const char* block_name(int b);

using Grads = std::vector<Eigen::MatrixXd>;

struct NetInput {
    Eigen::VectorXd grid;  // row-major G*G occupancy
    Eigen::VectorXd svec;
};

// Intermediate values kept for the backward pass.
struct ForwardCache {
    Eigen::MatrixXd x0, col1, z1, a1, col2, z2, a2;
    Eigen::VectorXd flat, f1, za, ha, zb, hb, h, zp, hp, logits, logp, pi, zv, hv;
    double value = 0.0;
    Eigen::VectorXd svec;
};

enum class Stage { Conv1 = 0, Conv2, F1, F2a, F2b, Heads };

class PolicyValueNet {
public:
    PolicyValueNet() = default;
    explicit PolicyValueNet(const NetConfig& cfg);

    const NetConfig& config() const { return cfg_; }
    std::vector<Eigen::MatrixXd>& params() { return params_; }
    const std::vector<Eigen::MatrixXd>& params() const { return params_; }
    std::size_t parameter_count() const;

    void zero();
    void init_orthogonal(std::uint64_t seed);

    Grads zero_grads() const;

    void forward(const NetInput& in, ForwardCache& c) const;
    // Recompute from `from` onward assuming earlier cache entries are current.
    void forward_from(Stage from, ForwardCache& c) const;
    void backward(const ForwardCache& c, const Eigen::VectorXd& dlogits, double dvalue, Grads& g) const;

private:
    NetConfig cfg_;
    std::vector<Eigen::MatrixXd> params_;
};

struct A3CTerms {
    double loss = 0.0;
    double policy = 0.0;
    double entropy = 0.0;
    double value = 0.0;
};

// Loss for one transition: -log pi(a) * A - beta * H(pi) + 0.5 (R - V)^2 with the
// advantage A = R - V held constant. Accumulates gradients into g.
A3CTerms a3c_loss(const ForwardCache& c, int action, double ret, double beta);
A3CTerms a3c_backward(const PolicyValueNet& net, const ForwardCache& c, int action, double ret, double beta,
                      Grads& g);

struct RmsProp {
    double lr = 7e-4;
    double decay = 0.99;
    double eps = 1e-5;
    double clip = 40.0;
    std::vector<Eigen::MatrixXd> v;
    std::uint64_t updates = 0;

    // Returns the pre-clip global norm; throws DivergedError on non-finite gradients.
    double apply(PolicyValueNet& net, Grads g);
};

// Shared parameters for asynchronous workers; copies and updates are atomic.
class SharedNet {
public:
    SharedNet(PolicyValueNet net, RmsProp opt) : net_(std::move(net)), opt_(std::move(opt)) {}
    void copy_to(PolicyValueNet& dst) const;
    double update(const Grads& g);
    PolicyValueNet snapshot() const;
    RmsProp optimizer() const;

private:
    mutable std::mutex mu_;
    PolicyValueNet net_;
    RmsProp opt_;
};

std::string checkpoint_to_json(const PolicyValueNet& net, const RmsProp& opt, std::uint64_t global_step);
void checkpoint_from_json(const std::string& text, PolicyValueNet& net, RmsProp& opt, std::uint64_t& global_step);

// Gaussian draws from a portable Box-Muller on mt19937_64 bits.
class Normal {
public:
    explicit Normal(std::uint64_t seed);
    double operator()();
    double uniform();

private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mwrl
