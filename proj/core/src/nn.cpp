#include "oread/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

namespace oread::nn {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Eigen::MatrixXd& ParamStore::declare(const std::string& name, Eigen::Index rows,
                                     Eigen::Index cols, Eigen::Index fan_in) {
    if (entries_.count(name))
        throw std::invalid_argument("ParamStore::declare: duplicate array " + name);
    if (rows <= 0 || cols <= 0 || fan_in <= 0)
        throw std::invalid_argument("ParamStore::declare: bad shape for " + name);
    Entry e{Eigen::MatrixXd::Zero(rows, cols), fan_in};
    return entries_.emplace(name, std::move(e)).first->second.value;
}

Eigen::MatrixXd& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::out_of_range("ParamStore::at: unknown array " + name);
    return it->second.value;
}

const Eigen::MatrixXd& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw std::out_of_range("ParamStore::at: unknown array " + name);
    return it->second.value;
}

void ParamStore::init_uniform(uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& [name, e] : entries_) {
        const double k = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
        std::uniform_real_distribution<double> dist(-k, k);
        for (Eigen::Index r = 0; r < e.value.rows(); ++r)
            for (Eigen::Index c = 0; c < e.value.cols(); ++c)
                e.value(r, c) = dist(rng);
    }
}

size_t ParamStore::total_parameters() const {
    size_t n = 0;
    for (const auto& [name, e] : entries_) n += static_cast<size_t>(e.value.size());
    return n;
}

uint64_t ParamStore::checksum() const {
    // FNV-1a, 64 bit.
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* data, size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    auto mix_u64 = [&](uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        mix(b, 8);
    };
    auto mix_f64 = [&](double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, 8);
        mix_u64(bits);
    };
    for (const auto& [name, e] : entries_) {
        mix(name.data(), name.size());
        mix("\0", 1);
        mix_u64(static_cast<uint64_t>(e.value.rows()));
        mix_u64(static_cast<uint64_t>(e.value.cols()));
        for (Eigen::Index r = 0; r < e.value.rows(); ++r)
            for (Eigen::Index c = 0; c < e.value.cols(); ++c)
                mix_f64(e.value(r, c));
    }
    return h;
}

Eigen::MatrixXd& GradStore::accum(const std::string& name, Eigen::Index rows,
                                  Eigen::Index cols) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        it = entries_.emplace(name, Eigen::MatrixXd::Zero(rows, cols)).first;
    return it->second;
}

void GradStore::scale(double s) {
    for (auto& [name, g] : entries_) g *= s;
}

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

const Eigen::MatrixXd& Tape::p(const std::string& name) const {
    if (!params_) throw std::logic_error("Tape: no ParamStore bound");
    return params_->at(name);
}

Tape::Id Tape::input(const Eigen::VectorXd& v) {
    Node n;
    n.op = Op::input;
    n.val = v;
    return push(std::move(n));
}

Tape::Id Tape::zeros(Eigen::Index len) {
    return input(Eigen::VectorXd::Zero(len));
}

Tape::Id Tape::param(const std::string& name) {
    const Eigen::MatrixXd& m = p(name);
    if (m.cols() != 1)
        throw std::invalid_argument("Tape::param: " + name + " is not a vector");
    Node n;
    n.op = Op::param;
    n.val = m.col(0);
    n.wname = name;
    return push(std::move(n));
}

Tape::Id Tape::affine(const std::string& w, Id x, const std::string& b) {
    const Eigen::MatrixXd& W = p(w);
    const Eigen::MatrixXd& B = p(b);
    if (W.cols() != nodes_[x].val.size() || B.rows() != W.rows() || B.cols() != 1)
        throw std::invalid_argument("Tape::affine: shape mismatch at " + w);
    Node n;
    n.op = Op::affine;
    n.val = W * nodes_[x].val + B.col(0);
    n.a = x;
    n.wname = w;
    n.bname = b;
    return push(std::move(n));
}

Tape::Id Tape::matvec(const std::string& w, Id x) {
    const Eigen::MatrixXd& W = p(w);
    if (W.cols() != nodes_[x].val.size())
        throw std::invalid_argument("Tape::matvec: shape mismatch at " + w);
    Node n;
    n.op = Op::matvec;
    n.val = W * nodes_[x].val;
    n.a = x;
    n.wname = w;
    return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
    if (nodes_[a].val.size() != nodes_[b].val.size())
        throw std::invalid_argument("Tape::add: length mismatch");
    Node n;
    n.op = Op::add;
    n.val = nodes_[a].val + nodes_[b].val;
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
    if (nodes_[a].val.size() != nodes_[b].val.size())
        throw std::invalid_argument("Tape::sub: length mismatch");
    Node n;
    n.op = Op::sub;
    n.val = nodes_[a].val - nodes_[b].val;
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
    if (nodes_[a].val.size() != nodes_[b].val.size())
        throw std::invalid_argument("Tape::mul: length mismatch");
    Node n;
    n.op = Op::mul;
    n.val = nodes_[a].val.cwiseProduct(nodes_[b].val);
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double s) {
    Node n;
    n.op = Op::scale;
    n.val = nodes_[a].val * s;
    n.a = a;
    n.c = s;
    return push(std::move(n));
}

Tape::Id Tape::add_const(Id a, const Eigen::VectorXd& c) {
    if (nodes_[a].val.size() != c.size())
        throw std::invalid_argument("Tape::add_const: length mismatch");
    Node n;
    n.op = Op::add_const;
    n.val = nodes_[a].val + c;
    n.a = a;
    n.cvec = c;
    return push(std::move(n));
}

Tape::Id Tape::mul_const(Id a, const Eigen::VectorXd& c) {
    if (nodes_[a].val.size() != c.size())
        throw std::invalid_argument("Tape::mul_const: length mismatch");
    Node n;
    n.op = Op::mul_const;
    n.val = nodes_[a].val.cwiseProduct(c);
    n.a = a;
    n.cvec = c;
    return push(std::move(n));
}

Tape::Id Tape::one_minus(Id a) {
    Node n;
    n.op = Op::one_minus;
    n.val = (1.0 - nodes_[a].val.array()).matrix();
    n.a = a;
    return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
    Node n;
    n.op = Op::tanh_;
    n.val = nodes_[a].val.array().tanh().matrix();
    n.a = a;
    return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id a) {
    Node n;
    n.op = Op::sigmoid_;
    n.val = nodes_[a].val.unaryExpr([](double v) { return stable_sigmoid(v); });
    n.a = a;
    return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
    Node n;
    n.op = Op::relu_;
    n.val = nodes_[a].val.cwiseMax(0.0);
    n.a = a;
    return push(std::move(n));
}

Tape::Id Tape::exp(Id a) {
    Node n;
    n.op = Op::exp_;
    n.val = nodes_[a].val.unaryExpr(
        [](double v) { return std::exp(std::clamp(v, -60.0, 60.0)); });
    n.a = a;
    return push(std::move(n));
}

Tape::Id Tape::concat(std::span<const Id> parts) {
    if (parts.empty()) throw std::invalid_argument("Tape::concat: empty");
    Eigen::Index total = 0;
    for (Id id : parts) total += nodes_[id].val.size();
    Node n;
    n.op = Op::concat_;
    n.val.resize(total);
    Eigen::Index off = 0;
    for (Id id : parts) {
        n.val.segment(off, nodes_[id].val.size()) = nodes_[id].val;
        off += nodes_[id].val.size();
    }
    n.many.assign(parts.begin(), parts.end());
    return push(std::move(n));
}

Tape::Id Tape::concat(std::initializer_list<Id> parts) {
    std::vector<Id> v(parts);
    return concat(std::span<const Id>(v));
}

Tape::Id Tape::slice(Id a, Eigen::Index offset, Eigen::Index len) {
    if (offset < 0 || len <= 0 || offset + len > nodes_[a].val.size())
        throw std::invalid_argument("Tape::slice: range out of bounds");
    Node n;
    n.op = Op::slice_;
    n.val = nodes_[a].val.segment(offset, len);
    n.a = a;
    n.off = offset;
    n.len = len;
    return push(std::move(n));
}

Tape::Id Tape::sum_squares(Id a) {
    Node n;
    n.op = Op::sum_squares_;
    n.val = Eigen::VectorXd::Constant(1, nodes_[a].val.squaredNorm());
    n.a = a;
    return push(std::move(n));
}

Tape::Id Tape::sqrt(Id a, double shift) {
    Node n;
    n.op = Op::sqrt_;
    n.c = shift;
    n.val = (nodes_[a].val.array() + shift).matrix();
    if ((n.val.array() < 0.0).any())
        throw std::domain_error("Tape::sqrt: negative argument");
    n.val = n.val.array().sqrt().matrix();
    n.a = a;
    return push(std::move(n));
}

void Tape::backward(Id root, GradStore& grads) const {
    if (root < 0 || static_cast<size_t>(root) >= nodes_.size())
        throw std::invalid_argument("Tape::backward: bad root");
    if (nodes_[root].val.size() != 1)
        throw std::invalid_argument("Tape::backward: root must be scalar");

    std::vector<Eigen::VectorXd> adj(static_cast<size_t>(root) + 1);
    adj[root] = Eigen::VectorXd::Ones(1);
    auto send = [&](Id id, const auto& v) {
        if (adj[id].size() == 0) adj[id] = Eigen::VectorXd::Zero(nodes_[id].val.size());
        adj[id] += v;
    };

    for (Id i = root; i >= 0; --i) {
        if (adj[i].size() == 0) continue;
        const Node& n = nodes_[i];
        const Eigen::VectorXd& a = adj[i];
        switch (n.op) {
            case Op::input:
                break;
            case Op::param:
                grads.accum(n.wname, n.val.size(), 1) += a;
                break;
            case Op::affine: {
                const Eigen::VectorXd& x = nodes_[n.a].val;
                grads.accum(n.wname, a.size(), x.size()) += a * x.transpose();
                grads.accum(n.bname, a.size(), 1) += a;
                send(n.a, p(n.wname).transpose() * a);
                break;
            }
            case Op::matvec: {
                const Eigen::VectorXd& x = nodes_[n.a].val;
                grads.accum(n.wname, a.size(), x.size()) += a * x.transpose();
                send(n.a, p(n.wname).transpose() * a);
                break;
            }
            case Op::add:
                send(n.a, a);
                send(n.b, a);
                break;
            case Op::sub:
                send(n.a, a);
                send(n.b, -a);
                break;
            case Op::mul:
                send(n.a, a.cwiseProduct(nodes_[n.b].val));
                send(n.b, a.cwiseProduct(nodes_[n.a].val));
                break;
            case Op::scale:
                send(n.a, (a * n.c).eval());
                break;
            case Op::add_const:
                send(n.a, a);
                break;
            case Op::mul_const:
                send(n.a, a.cwiseProduct(n.cvec));
                break;
            case Op::one_minus:
                send(n.a, -a);
                break;
            case Op::tanh_:
                send(n.a, a.cwiseProduct(
                              (1.0 - n.val.array().square()).matrix()));
                break;
            case Op::sigmoid_:
                send(n.a, a.cwiseProduct(
                              (n.val.array() * (1.0 - n.val.array())).matrix()));
                break;
            case Op::relu_:
                send(n.a, a.cwiseProduct(
                              (nodes_[n.a].val.array() > 0.0).cast<double>().matrix()));
                break;
            case Op::exp_: {
                // Derivative vanishes outside the clamp interval.
                const Eigen::VectorXd& x = nodes_[n.a].val;
                Eigen::ArrayXd inside =
                    ((x.array() > -60.0) && (x.array() < 60.0)).cast<double>();
                send(n.a, a.cwiseProduct((n.val.array() * inside).matrix()));
                break;
            }
            case Op::concat_: {
                Eigen::Index off = 0;
                for (Id part : n.many) {
                    const Eigen::Index len = nodes_[part].val.size();
                    send(part, a.segment(off, len).eval());
                    off += len;
                }
                break;
            }
            case Op::slice_: {
                if (adj[n.a].size() == 0)
                    adj[n.a] = Eigen::VectorXd::Zero(nodes_[n.a].val.size());
                adj[n.a].segment(n.off, n.len) += a;
                break;
            }
            case Op::sum_squares_:
                send(n.a, (2.0 * a(0) * nodes_[n.a].val).eval());
                break;
            case Op::sqrt_:
                send(n.a, (a.array() * 0.5 / n.val.array()).matrix());
                break;
        }
    }
}

void declare_gru(ParamStore& ps, const GruSpec& s) {
    ps.declare(s.prefix + ".wr", s.hidden, s.in, s.in);
    ps.declare(s.prefix + ".wz", s.hidden, s.in, s.in);
    ps.declare(s.prefix + ".wn", s.hidden, s.in, s.in);
    ps.declare(s.prefix + ".ur", s.hidden, s.hidden, s.hidden);
    ps.declare(s.prefix + ".uz", s.hidden, s.hidden, s.hidden);
    ps.declare(s.prefix + ".un", s.hidden, s.hidden, s.hidden);
    ps.declare(s.prefix + ".br", s.hidden, 1, s.hidden);
    ps.declare(s.prefix + ".bz", s.hidden, 1, s.hidden);
    ps.declare(s.prefix + ".bn", s.hidden, 1, s.hidden);
}

Tape::Id gru_step(Tape& t, const GruSpec& s, Tape::Id x, Tape::Id h_prev) {
    const auto r = t.sigmoid(t.add(t.affine(s.prefix + ".wr", x, s.prefix + ".br"),
                                   t.matvec(s.prefix + ".ur", h_prev)));
    const auto z = t.sigmoid(t.add(t.affine(s.prefix + ".wz", x, s.prefix + ".bz"),
                                   t.matvec(s.prefix + ".uz", h_prev)));
    const auto n = t.tanh(t.add(t.affine(s.prefix + ".wn", x, s.prefix + ".bn"),
                                t.matvec(s.prefix + ".un", t.mul(r, h_prev))));
    return t.add(t.mul(t.one_minus(z), n), t.mul(z, h_prev));
}

void declare_mlp(ParamStore& ps, const MlpSpec& s) {
    if (s.dims.size() < 2)
        throw std::invalid_argument("declare_mlp: need at least in and out dims");
    for (size_t i = 0; i + 1 < s.dims.size(); ++i) {
        const std::string layer = s.prefix + "." + std::to_string(i);
        ps.declare(layer + ".w", s.dims[i + 1], s.dims[i], s.dims[i]);
        ps.declare(layer + ".b", s.dims[i + 1], 1, s.dims[i]);
    }
}

Tape::Id mlp_apply(Tape& t, const MlpSpec& s, Tape::Id x) {
    Tape::Id cur = x;
    const size_t layers = s.dims.size() - 1;
    for (size_t i = 0; i < layers; ++i) {
        const std::string layer = s.prefix + "." + std::to_string(i);
        cur = t.affine(layer + ".w", cur, layer + ".b");
        if (i + 1 < layers || s.relu_last) cur = t.relu(cur);
    }
    return cur;
}

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const auto& [name, g] : grads.entries()) {
        if (!g.allFinite())
            throw std::runtime_error("adam_step: non-finite gradient for " + name);
        Eigen::MatrixXd& w = params.at(name);
        if (w.rows() != g.rows() || w.cols() != g.cols())
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
        auto it = state.moments.find(name);
        if (it == state.moments.end())
            it = state.moments
                     .emplace(name, std::make_pair(Eigen::MatrixXd::Zero(g.rows(), g.cols()),
                                                   Eigen::MatrixXd::Zero(g.rows(), g.cols())))
                     .first;
        Eigen::MatrixXd& m = it->second.first;
        Eigen::MatrixXd& v = it->second.second;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const Eigen::MatrixXd mhat = m / bc1;
        const Eigen::MatrixXd vhat = v / bc2;
        w.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
    }
}

double finite_diff_check(const std::function<Tape::Id(Tape&)>& build_loss,
                         ParamStore& params, double eps, size_t max_coords,
                         uint64_t sample_seed) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("finite_diff_check: eps outside [1e-7, 1e-3]");

    GradStore analytic;
    {
        Tape t(&params);
        const Tape::Id root = build_loss(t);
        t.backward(root, analytic);
    }
    auto eval = [&]() {
        Tape t(&params);
        return t.value(build_loss(t))(0);
    };

    std::mt19937_64 rng(sample_seed);
    double worst = 0.0;
    for (auto& [name, entry] : params.entries()) {
        Eigen::MatrixXd& w = entry.value;
        const auto git = analytic.entries().find(name);
        const size_t count = static_cast<size_t>(w.size());
        std::vector<size_t> coords(count);
        for (size_t i = 0; i < count; ++i) coords[i] = i;
        if (count > max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords);
        }
        for (size_t flat : coords) {
            double& slot = w.data()[flat];
            const double keep = slot;
            slot = keep + eps;
            const double up = eval();
            slot = keep - eps;
            const double dn = eval();
            slot = keep;
            const double fd = (up - dn) / (2.0 * eps);
            const double an =
                git == analytic.entries().end() ? 0.0 : git->second.data()[flat];
            const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace oread::nn
