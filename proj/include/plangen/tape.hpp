#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plangen/errors.hpp"

namespace plangen::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

// A named, persistent trainable tensor. Lives outside any tape; each
// forward pass binds it to a leaf node via Tape::watch and backward
// accumulates into `grad`.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    const Matrix& grad() const;
    bool requires_grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    bool valid() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* t, int id) : tape_(t), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Reverse-mode gradient tape over dense float64 matrices (rank <= 2;
// vectors are 1xN). Nodes are recorded in topological order by
// construction; backward() visits each node exactly once in reverse.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // When false, watch() produces constants and ops skip recording
    // backward closures. Used for inference.
    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    Var constant(Matrix v) { return Var(this, record(std::move(v), false, {})); }
    Var scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }
    Var zeros(Eigen::Index r, Eigen::Index c) { return constant(Matrix::Zero(r, c)); }
    Var ones(Eigen::Index r, Eigen::Index c) { return constant(Matrix::Ones(r, c)); }

    // A differentiable leaf not tied to a Parameter (tests, probes).
    Var input(Matrix v) { return Var(this, record(std::move(v), grad_enabled_, {})); }

    // Bind a Parameter to this tape. Repeated watches of the same
    // Parameter return the same node. After backward(), the node's
    // gradient is added into p.grad.
    Var watch(Parameter& p);

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node,
    // then flushes watched-parameter gradients into Parameter::grad.
    void backward(Var loss);

    size_t size() const { return nodes_.size(); }

    // Low-level node insertion; public so tests can build custom ops
    // (e.g. a deliberately corrupted backward rule).
    int record(Matrix value, bool requires_grad, BackwardFn backward);

    // Handle for a node created via record().
    Var var(int id) { return Var(this, id); }

    const Matrix& value_of(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Matrix& grad_of(int id) const;
    bool node_requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    // Accumulate into a node's gradient (no-op for non-grad nodes).
    void add_grad(int id, const Matrix& g);

private:
    struct Node {
        Matrix value;
        Matrix grad;  // empty until first accumulation
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<Parameter*, int>> watched_;
    std::unordered_map<Parameter*, int> watch_index_;
    bool grad_enabled_ = true;
};

inline const Matrix& Var::value() const { return tape_->value_of(id_); }
inline const Matrix& Var::grad() const { return tape_->grad_of(id_); }
inline bool Var::requires_grad() const { return tape_->node_requires_grad(id_); }

// ---- elementwise ----------------------------------------------------------
// Binary ops accept equal shapes or a 1x1 scalar on either side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var add_scalar(Var v, double c);
Var scale(Var v, double c);
inline Var one_minus(Var v) { return add_scalar(scale(v, -1.0), 1.0); }

Var tanh(Var v);
Var sigmoid(Var v);
Var exp(Var v);
Var log(Var v);
Var softplus(Var v);

// ---- structure ------------------------------------------------------------
Var matmul(Var a, Var b);
Var transpose(Var v);
Var concat_cols(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& rows);
Var row(Var v, Eigen::Index i);
Var entry(Var v, Eigen::Index i, Eigen::Index j);
Var sum(Var v);
Var mean(Var v);
Var tile_rows(Var v, Eigen::Index times);
Var repeat_each_row(Var v, Eigen::Index times);
Var pad_cols(Var v, Eigen::Index total_cols);
Var reshape_rows(Var v, Eigen::Index rows, Eigen::Index cols);  // row-major
Var shift_rows_up(Var v);    // row i <- row i+1, last row zero
Var shift_cols_left(Var v);  // col j <- col j+1, last col zero
Var col_mul(Var a, Var u);          // a(:,i) * u(0,i)
Var add_rowvec(Var a, Var b);       // broadcast 1xN over rows

// ---- normalisation & selection --------------------------------------------
Var softmax_rows(Var v);
Var log_softmax_rows(Var v);
Var layer_norm(Var x, Var gain, Var bias);  // per-row, eps = 1e-5

// Straight-through discretisation: forward is one_hot(argmax(v)) with
// lowest-index tie break; backward passes the upstream gradient through
// unchanged (the soft path's gradient).
Var st_one_hot(Var v);

// Lowest-index argmax over a 1xN row.
Eigen::Index argmax_row(const Matrix& v);

}  // namespace plangen::ad
