#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace oread::nn {

// Named dense parameter arrays. Shapes are fixed at declaration; the map is
// ordered so every whole-store walk (init, update, checksum, serialization)
// visits arrays in the same order on every platform.
class ParamStore {
public:
    struct Entry {
        Eigen::MatrixXd value;
        Eigen::Index fan_in; // drives the init range, not serialized
    };

    Eigen::MatrixXd& declare(const std::string& name, Eigen::Index rows,
                             Eigen::Index cols, Eigen::Index fan_in);
    Eigen::MatrixXd& at(const std::string& name);
    const Eigen::MatrixXd& at(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    // U(-k, k) per array with k = 1 / sqrt(fan_in), one RNG stream consumed
    // in name order, so the result depends only on (shapes, seed).
    void init_uniform(uint64_t seed);

    size_t total_parameters() const;
    // FNV-1a over names, shapes, and raw little-endian doubles in name order.
    uint64_t checksum() const;

    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::map<std::string, Entry>& entries() { return entries_; }

private:
    std::map<std::string, Entry> entries_;
};

// Gradient accumulator aligned with a ParamStore. Arrays appear on first
// touch, zero filled.
class GradStore {
public:
    Eigen::MatrixXd& accum(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    const std::map<std::string, Eigen::MatrixXd>& entries() const { return entries_; }
    void scale(double s);
    void clear() { entries_.clear(); }
    bool empty() const { return entries_.empty(); }

private:
    std::map<std::string, Eigen::MatrixXd> entries_;
};

// Reverse-mode differentiation over a record of vector operations. A Tape is
// bound to one ParamStore; parameter reads go through named ops (affine,
// matvec, param) so backward() can route adjoints into a GradStore.
//
// Usage: build the forward computation once per sample, read value(root),
// call backward(root, grads). clear() recycles the buffers.
class Tape {
public:
    using Id = int32_t;

    explicit Tape(const ParamStore* params = nullptr) : params_(params) {}
    void bind(const ParamStore* params) { params_ = params; }
    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

    Id input(const Eigen::VectorXd& v);            // constant leaf
    Id zeros(Eigen::Index n);
    Id param(const std::string& name);             // trainable vector leaf
    Id affine(const std::string& w, Id x, const std::string& b); // W x + b
    Id matvec(const std::string& w, Id x);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);                            // elementwise
    Id scale(Id a, double s);
    Id add_const(Id a, const Eigen::VectorXd& c);
    Id mul_const(Id a, const Eigen::VectorXd& c);  // elementwise
    Id one_minus(Id a);                            // 1 - x
    Id tanh(Id a);
    Id sigmoid(Id a);
    Id relu(Id a);
    Id exp(Id a);                                  // input clamped to [-60, 60]
    Id concat(std::span<const Id> parts);
    Id concat(std::initializer_list<Id> parts);
    Id slice(Id a, Eigen::Index offset, Eigen::Index len);
    Id sum_squares(Id a);                          // scalar node
    // Elementwise sqrt(x + shift). Callers pass shift > 0 whenever the
    // argument can reach zero, keeping the derivative finite.
    Id sqrt(Id a, double shift = 0.0);

    const Eigen::VectorXd& value(Id id) const { return nodes_[id].val; }

    // Accumulates d(root)/d(param) into grads. root must be a scalar node.
    void backward(Id root, GradStore& grads) const;

private:
    enum class Op : uint8_t {
        input, param, affine, matvec, add, sub, mul, scale, add_const,
        mul_const, one_minus, tanh_, sigmoid_, relu_, exp_, concat_, slice_,
        sum_squares_, sqrt_,
    };
    struct Node {
        Op op;
        Eigen::VectorXd val;
        Id a = -1, b = -1;
        std::vector<Id> many;       // concat parts
        Eigen::Index off = 0, len = 0;
        double c = 0.0;             // scale factor or sqrt shift
        Eigen::VectorXd cvec;       // add_const / mul_const operand
        std::string wname, bname;   // parameter names
    };

    Id push(Node n);
    const Eigen::MatrixXd& p(const std::string& name) const;

    const ParamStore* params_;
    std::vector<Node> nodes_;
};

// Gated recurrent unit in the common reset/update/candidate form:
//   r = sigmoid(Wr x + Ur h + br)
//   z = sigmoid(Wz x + Uz h + bz)
//   n = tanh(Wn x + Un (r .* h) + bn)
//   h' = (1 - z) .* n + z .* h
// This block is the single definition used by every recurrent model here.
struct GruSpec {
    std::string prefix;
    Eigen::Index in = 0;
    Eigen::Index hidden = 0;
};

void declare_gru(ParamStore& ps, const GruSpec& spec);
Tape::Id gru_step(Tape& t, const GruSpec& spec, Tape::Id x, Tape::Id h_prev);

// Fully connected stack. dims = (in, h1, ..., out); ReLU follows every layer
// except the last unless relu_last is set.
struct MlpSpec {
    std::string prefix;
    std::vector<Eigen::Index> dims;
    bool relu_last = false;
};

void declare_mlp(ParamStore& ps, const MlpSpec& spec);
Tape::Id mlp_apply(Tape& t, const MlpSpec& spec, Tape::Id x);

// Adam with bias correction and no weight decay. Moment arrays join the
// state on first use. Updates only the arrays present in grads; throws
// std::runtime_error naming the parameter on non-finite gradients.
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> moments;
    int64_t step = 0;
};

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

// Central-difference audit of backward(). build_loss must construct the full
// forward graph on the given tape and return the scalar root. Checks up to
// max_coords coordinates per array (sampled when the array is larger).
// Returns the maximum relative error. eps must lie in [1e-7, 1e-3].
double finite_diff_check(
    const std::function<Tape::Id(Tape&)>& build_loss, ParamStore& params,
    double eps, size_t max_coords = 64, uint64_t sample_seed = 1);

// Versioned weight container: named arrays with shapes plus a content
// checksum. load_weights fills an already declared store and rejects
// missing arrays, shape mismatches, and checksum disagreement.
void save_weights(const ParamStore& ps, const std::filesystem::path& path);
void load_weights(const std::filesystem::path& path, ParamStore& ps);

} // namespace oread::nn
