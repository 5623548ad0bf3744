#include "mwrl/nn.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "mwrl/errors.hpp"

namespace mwrl {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd im2col(const MatrixXd& x, int h, int w) {
    const int c = static_cast<int>(x.rows());
    const int oh = h - 2, ow = w - 2;
    MatrixXd col(9 * c, oh * ow);
    for (int ch = 0; ch < c; ++ch)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const int row = ch * 9 + ky * 3 + kx;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        col(row, oy * ow + ox) = x(ch, (oy + ky) * w + ox + kx);
            }
    return col;
}

MatrixXd col2im(const MatrixXd& col, int c, int h, int w) {
    const int oh = h - 2, ow = w - 2;
    MatrixXd x = MatrixXd::Zero(c, h * w);
    for (int ch = 0; ch < c; ++ch)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const int row = ch * 9 + ky * 3 + kx;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        x(ch, (oy + ky) * w + ox + kx) += col(row, oy * ow + ox);
            }
    return x;
}

MatrixXd orthogonal(int rows, int cols, double gain, Normal& rnd) {
    const int big = std::max(rows, cols), small = std::min(rows, cols);
    MatrixXd a(big, small);
    for (int j = 0; j < small; ++j)
        for (int i = 0; i < big; ++i) a(i, j) = rnd();
    Eigen::HouseholderQR<MatrixXd> qr(a);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(big, small);
    const VectorXd d = qr.matrixQR().diagonal();
    for (int j = 0; j < small; ++j)
        if (d(j) < 0) q.col(j) *= -1.0;
    if (rows < cols) q.transposeInPlace();
    return gain * q;
}

VectorXd dtanh(const VectorXd& h) { return (1.0 - h.array().square()).matrix(); }

}  // namespace

const char* block_name(int b) {
    static const char* names[] = {"conv1.w", "conv1.b", "conv2.w", "conv2.b", "f1.w", "f1.b",
                                  "f2a.w", "f2a.b", "f2b.w", "f2b.b",
                                  "actor1.w", "actor1.b", "actor2.w", "actor2.b",
                                  "critic1.w", "critic1.b", "critic2.w", "critic2.b"};
    return (b >= 0 && b < kBlockCount) ? names[b] : "?";
}

PolicyValueNet::PolicyValueNet(const NetConfig& cfg) : cfg_(cfg) {
    if (cfg.grid < 5) throw UserError("network grid must be at least 5");
    if (cfg.svec < 1 || cfg.actions < 1) throw UserError("network input and action sizes must be positive");
    const int p2 = (cfg.grid - 4) * (cfg.grid - 4);
    const int trunk = cfg.f1_out + cfg.f2_hidden2;
    const int shapes[kBlockCount][2] = {
        {cfg.conv1, 9}, {cfg.conv1, 1},
        {cfg.conv2, 9 * cfg.conv1}, {cfg.conv2, 1},
        {cfg.f1_out, cfg.conv2 * p2}, {cfg.f1_out, 1},
        {cfg.f2_hidden1, cfg.svec}, {cfg.f2_hidden1, 1},
        {cfg.f2_hidden2, cfg.f2_hidden1}, {cfg.f2_hidden2, 1},
        {cfg.head_hidden, trunk}, {cfg.head_hidden, 1},
        {cfg.actions, cfg.head_hidden}, {cfg.actions, 1},
        {cfg.head_hidden, trunk}, {cfg.head_hidden, 1},
        {1, cfg.head_hidden}, {1, 1}};
    for (const auto& s : shapes) params_.push_back(MatrixXd::Zero(s[0], s[1]));
}

std::size_t PolicyValueNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
}

void PolicyValueNet::zero() {
    for (auto& p : params_) p.setZero();
}

void PolicyValueNet::init_orthogonal(std::uint64_t seed) {
    Normal rnd(seed);
    const double relu = std::numbers::sqrt2;
    const double gains[] = {relu, relu, 1.0, 1.0, 1.0, 1.0, 0.01, 1.0, 0.01};
    for (int b = 0; b < kBlockCount; b += 2) {
        auto& w = params_[static_cast<std::size_t>(b)];
        w = orthogonal(static_cast<int>(w.rows()), static_cast<int>(w.cols()), gains[b / 2], rnd);
        params_[static_cast<std::size_t>(b + 1)].setZero();
    }
}

Grads PolicyValueNet::zero_grads() const {
    Grads g;
    for (const auto& p : params_) g.push_back(MatrixXd::Zero(p.rows(), p.cols()));
    return g;
}

void PolicyValueNet::forward(const NetInput& in, ForwardCache& c) const {
    const int g = cfg_.grid;
    if (in.grid.size() != g * g || in.svec.size() != cfg_.svec) throw UserError("network input dimension mismatch");
    c.x0 = in.grid.transpose();
    c.svec = in.svec;
    c.col1 = im2col(c.x0, g, g);
    forward_from(Stage::Conv1, c);
}

void PolicyValueNet::forward_from(Stage from, ForwardCache& c) const {
    const auto& P = params_;
    const int g = cfg_.grid;
    switch (from) {
        case Stage::Conv1:
            c.z1 = (P[kConv1W] * c.col1).colwise() + P[kConv1B].col(0);
            c.a1 = c.z1.cwiseMax(0.0);
            c.col2 = im2col(c.a1, g - 2, g - 2);
            [[fallthrough]];
        case Stage::Conv2:
            c.z2 = (P[kConv2W] * c.col2).colwise() + P[kConv2B].col(0);
            c.a2 = c.z2.cwiseMax(0.0);
            c.flat = Eigen::Map<const VectorXd>(c.a2.data(), c.a2.size());
            [[fallthrough]];
        case Stage::F1:
            c.f1 = P[kF1W] * c.flat + P[kF1B].col(0);
            if (from == Stage::F1) break;
            [[fallthrough]];
        case Stage::F2a:
            if (from != Stage::F1) {
                c.za = P[kF2aW] * c.svec + P[kF2aB].col(0);
                c.ha = c.za.array().tanh().matrix();
            }
            [[fallthrough]];
        case Stage::F2b:
            if (from != Stage::F1) {
                c.zb = P[kF2bW] * c.ha + P[kF2bB].col(0);
                c.hb = c.zb.array().tanh().matrix();
            }
            [[fallthrough]];
        case Stage::Heads:
            break;
    }
    c.h.resize(c.f1.size() + c.hb.size());
    c.h << c.f1, c.hb;
    c.zp = P[kActorW1] * c.h + P[kActorB1].col(0);
    c.hp = c.zp.array().tanh().matrix();
    c.logits = P[kActorW2] * c.hp + P[kActorB2].col(0);
    const double mx = c.logits.maxCoeff();
    const double lse = mx + std::log((c.logits.array() - mx).exp().sum());
    c.logp = (c.logits.array() - lse).matrix();
    c.pi = c.logp.array().exp().matrix();
    c.zv = P[kCriticW1] * c.h + P[kCriticB1].col(0);
    c.hv = c.zv.array().tanh().matrix();
    c.value = (P[kCriticW2] * c.hv)(0) + P[kCriticB2](0, 0);
}

void PolicyValueNet::backward(const ForwardCache& c, const VectorXd& dlogits, double dvalue, Grads& g) const {
    const auto& P = params_;
    const int gs = cfg_.grid;
    VectorXd dh = VectorXd::Zero(c.h.size());

    g[kCriticW2] += dvalue * c.hv.transpose();
    g[kCriticB2](0, 0) += dvalue;
    const VectorXd dzv = (P[kCriticW2].transpose() * dvalue).cwiseProduct(dtanh(c.hv));
    g[kCriticW1] += dzv * c.h.transpose();
    g[kCriticB1] += dzv;
    dh += P[kCriticW1].transpose() * dzv;

    g[kActorW2] += dlogits * c.hp.transpose();
    g[kActorB2] += dlogits;
    const VectorXd dzp = (P[kActorW2].transpose() * dlogits).cwiseProduct(dtanh(c.hp));
    g[kActorW1] += dzp * c.h.transpose();
    g[kActorB1] += dzp;
    dh += P[kActorW1].transpose() * dzp;

    const VectorXd df1 = dh.head(c.f1.size());
    const VectorXd dzb = dh.tail(c.hb.size()).cwiseProduct(dtanh(c.hb));
    g[kF2bW] += dzb * c.ha.transpose();
    g[kF2bB] += dzb;
    const VectorXd dza = (P[kF2bW].transpose() * dzb).cwiseProduct(dtanh(c.ha));
    g[kF2aW] += dza * c.svec.transpose();
    g[kF2aB] += dza;

    g[kF1W] += df1 * c.flat.transpose();
    g[kF1B] += df1;
    const VectorXd dflat = P[kF1W].transpose() * df1;
    MatrixXd dz2 = Eigen::Map<const MatrixXd>(dflat.data(), c.a2.rows(), c.a2.cols());
    dz2 = dz2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
    g[kConv2W] += dz2 * c.col2.transpose();
    g[kConv2B] += dz2.rowwise().sum();
    const MatrixXd da1 = col2im(P[kConv2W].transpose() * dz2, cfg_.conv1, gs - 2, gs - 2);
    const MatrixXd dz1 = da1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    g[kConv1W] += dz1 * c.col1.transpose();
    g[kConv1B] += dz1.rowwise().sum();
}

A3CTerms a3c_loss(const ForwardCache& c, int action, double ret, double beta) {
    A3CTerms t;
    const double adv = ret - c.value;
    t.entropy = -(c.pi.array() * c.logp.array()).sum();
    t.policy = -c.logp(action) * adv;
    t.value = 0.5 * adv * adv;
    t.loss = t.policy - beta * t.entropy + t.value;
    return t;
}

A3CTerms a3c_backward(const PolicyValueNet& net, const ForwardCache& c, int action, double ret, double beta,
                      Grads& g) {
    const A3CTerms t = a3c_loss(c, action, ret, beta);
    const double adv = ret - c.value;
    VectorXd dlogits = c.pi * adv;
    dlogits(action) -= adv;
    dlogits += beta * (c.pi.array() * (c.logp.array() + t.entropy)).matrix();
    net.backward(c, dlogits, c.value - ret, g);
    return t;
}

double RmsProp::apply(PolicyValueNet& net, Grads g) {
    auto& p = net.params();
    if (v.empty())
        for (const auto& b : p) v.push_back(MatrixXd::Zero(b.rows(), b.cols()));
    double sq = 0.0;
    for (std::size_t b = 0; b < g.size(); ++b) {
        if (!g[b].allFinite()) throw DivergedError(std::string("diverged: non-finite gradient in ") + block_name(static_cast<int>(b)));
        sq += g[b].squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double scale = (norm > clip) ? clip / norm : 1.0;
    for (std::size_t b = 0; b < g.size(); ++b) {
        if (scale != 1.0) g[b] *= scale;
        v[b] = decay * v[b] + (1.0 - decay) * g[b].cwiseProduct(g[b]);
        p[b].array() -= lr * g[b].array() / (v[b].array().sqrt() + eps);
    }
    ++updates;
    return norm;
}

void SharedNet::copy_to(PolicyValueNet& dst) const {
    std::lock_guard<std::mutex> lock(mu_);
    dst = net_;
}

double SharedNet::update(const Grads& g) {
    std::lock_guard<std::mutex> lock(mu_);
    return opt_.apply(net_, g);
}

PolicyValueNet SharedNet::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return net_;
}

RmsProp SharedNet::optimizer() const {
    std::lock_guard<std::mutex> lock(mu_);
    return opt_;
}

namespace {

nlohmann::ordered_json block_json(const std::string& name, const MatrixXd& m) {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    j["data"] = data;
    return j;
}

MatrixXd block_from_json(const nlohmann::json& j, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (j.at("name").get<std::string>() != name || j.at("rows").get<Eigen::Index>() != rows ||
        j.at("cols").get<Eigen::Index>() != cols)
        throw UserError("checkpoint block mismatch at " + name);
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw UserError("checkpoint block size mismatch at " + name);
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    return m;
}

}  // namespace

std::string checkpoint_to_json(const PolicyValueNet& net, const RmsProp& opt, std::uint64_t global_step) {
    const auto& c = net.config();
    nlohmann::ordered_json j;
    j["format"] = "mwrl-net-1";
    j["config"] = {{"grid", c.grid}, {"svec", c.svec}, {"actions", c.actions}, {"conv1", c.conv1},
                   {"conv2", c.conv2}, {"f1_out", c.f1_out}, {"f2_hidden1", c.f2_hidden1},
                   {"f2_hidden2", c.f2_hidden2}, {"head_hidden", c.head_hidden}};
    j["global_step"] = global_step;
    auto blocks = nlohmann::ordered_json::array();
    for (int b = 0; b < kBlockCount; ++b) blocks.push_back(block_json(block_name(b), net.params()[static_cast<std::size_t>(b)]));
    j["blocks"] = blocks;
    nlohmann::ordered_json o;
    o["lr"] = opt.lr;
    o["decay"] = opt.decay;
    o["eps"] = opt.eps;
    o["clip"] = opt.clip;
    o["updates"] = opt.updates;
    auto vs = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < opt.v.size(); ++b) vs.push_back(block_json(block_name(static_cast<int>(b)), opt.v[b]));
    o["v"] = vs;
    j["optimizer"] = o;
    return j.dump() + "\n";
}

void checkpoint_from_json(const std::string& text, PolicyValueNet& net, RmsProp& opt, std::uint64_t& global_step) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "mwrl-net-1") throw UserError("unknown checkpoint format");
        const auto& jc = j.at("config");
        NetConfig c;
        c.grid = jc.at("grid");
        c.svec = jc.at("svec");
        c.actions = jc.at("actions");
        c.conv1 = jc.at("conv1");
        c.conv2 = jc.at("conv2");
        c.f1_out = jc.at("f1_out");
        c.f2_hidden1 = jc.at("f2_hidden1");
        c.f2_hidden2 = jc.at("f2_hidden2");
        c.head_hidden = jc.at("head_hidden");
        PolicyValueNet n(c);
        const auto& blocks = j.at("blocks");
        if (blocks.size() != kBlockCount) throw UserError("checkpoint has wrong block count");
        for (int b = 0; b < kBlockCount; ++b) {
            auto& m = n.params()[static_cast<std::size_t>(b)];
            m = block_from_json(blocks.at(static_cast<std::size_t>(b)), block_name(b), m.rows(), m.cols());
        }
        const auto& o = j.at("optimizer");
        RmsProp r;
        r.lr = o.at("lr");
        r.decay = o.at("decay");
        r.eps = o.at("eps");
        r.clip = o.at("clip");
        r.updates = o.at("updates");
        const auto& vs = o.at("v");
        for (std::size_t b = 0; b < vs.size(); ++b) {
            const auto& m = n.params()[b];
            r.v.push_back(block_from_json(vs.at(b), block_name(static_cast<int>(b)), m.rows(), m.cols()));
        }
        global_step = j.at("global_step");
        net = std::move(n);
        opt = std::move(r);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("checkpoint JSON: ") + e.what());
    }
}

Normal::Normal(std::uint64_t seed) : rng_(seed) {}

double Normal::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

double Normal::operator()() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mwrl
