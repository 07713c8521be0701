#include "plangen/tape.hpp"

#include <cmath>
#include <sstream>

namespace plangen::ad {

namespace {

std::string shape_str(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

std::string shape_str(Var v) { return shape_str(v.value()); }

void require_same_tape(Var a, Var b, const char* op) {
    if (a.tape() != b.tape())
        throw ContractError(std::string(op) + ": operands live on different tapes");
}

bool is_scalar(Var v) { return v.rows() == 1 && v.cols() == 1; }

}  // namespace

// ---- Tape -------------------------------------------------------------------

int Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::watch(Parameter& p) {
    if (!grad_enabled_) return constant(p.value);
    auto it = watch_index_.find(&p);
    if (it != watch_index_.end()) return Var(this, it->second);
    int id = record(p.value, true, {});
    watch_index_.emplace(&p, id);
    watched_.emplace_back(&p, id);
    return Var(this, id);
}

const Matrix& Tape::grad_of(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0) {
        static const Matrix kEmpty;
        return kEmpty;
    }
    return n.grad;
}

void Tape::add_grad(int id, const Matrix& g) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
        n.grad = g;
    else
        n.grad += g;
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw ContractError("backward: loss is not on this tape");
    if (loss.rows() != 1 || loss.cols() != 1)
        throw ContractError("backward: loss must be 1x1, got " + shape_str(loss));
    Node& top = nodes_[static_cast<size_t>(loss.id())];
    if (!top.requires_grad) return;  // nothing reachable requires grad
    add_grad(loss.id(), Matrix::Ones(1, 1));
    for (int i = loss.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
        n.backward(*this, n.grad);
    }
    for (auto& [param, id] : watched_) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.size() != 0) param->grad += n.grad;
    }
}

// ---- elementwise binaries ---------------------------------------------------

namespace {

enum class BinKind { Add, Sub, Mul, Div };

Var binary(Var a, Var b, BinKind kind, const char* name) {
    require_same_tape(a, b, name);
    Tape& t = *a.tape();
    const Matrix& av = a.value();
    const Matrix& bv = b.value();

    const bool a_scalar = is_scalar(a), b_scalar = is_scalar(b);
    const bool same = av.rows() == bv.rows() && av.cols() == bv.cols();
    if (!same && !a_scalar && !b_scalar)
        throw DimensionError(std::string(name) + ": shapes " + shape_str(a) + " and " +
                             shape_str(b) + " are incompatible");

    Matrix out;
    const bool broadcast_a = a_scalar && !same;  // scalar a against matrix b
    const bool broadcast_b = b_scalar && !same;
    switch (kind) {
        case BinKind::Add:
            if (broadcast_a)
                out = (bv.array() + av(0, 0)).matrix();
            else if (broadcast_b)
                out = (av.array() + bv(0, 0)).matrix();
            else
                out = av + bv;
            break;
        case BinKind::Sub:
            if (broadcast_a)
                out = (av(0, 0) - bv.array()).matrix();
            else if (broadcast_b)
                out = (av.array() - bv(0, 0)).matrix();
            else
                out = av - bv;
            break;
        case BinKind::Mul:
            if (broadcast_a)
                out = bv * av(0, 0);
            else if (broadcast_b)
                out = av * bv(0, 0);
            else
                out = av.cwiseProduct(bv);
            break;
        case BinKind::Div:
            if (broadcast_a)
                out = (av(0, 0) / bv.array()).matrix();
            else if (broadcast_b)
                out = av / bv(0, 0);
            else
                out = av.cwiseQuotient(bv);
            break;
    }

    const bool rg = a.requires_grad() || b.requires_grad();
    int aid = a.id(), bid = b.id();
    int id = t.record(std::move(out), rg, [=](Tape& tp, const Matrix& g) {
        const Matrix& A = tp.value_of(aid);
        const Matrix& B = tp.value_of(bid);
        const bool as = A.size() == 1 && g.size() != 1;
        const bool bs = B.size() == 1 && g.size() != 1;
        switch (kind) {
            case BinKind::Add:
                if (as)
                    tp.add_grad(aid, Matrix::Constant(1, 1, g.sum()));
                else
                    tp.add_grad(aid, g);
                if (bs)
                    tp.add_grad(bid, Matrix::Constant(1, 1, g.sum()));
                else
                    tp.add_grad(bid, g);
                break;
            case BinKind::Sub:
                if (as)
                    tp.add_grad(aid, Matrix::Constant(1, 1, g.sum()));
                else
                    tp.add_grad(aid, g);
                if (bs)
                    tp.add_grad(bid, Matrix::Constant(1, 1, -g.sum()));
                else
                    tp.add_grad(bid, -g);
                break;
            case BinKind::Mul:
                if (as)
                    tp.add_grad(aid, Matrix::Constant(1, 1, g.cwiseProduct(B).sum()));
                else if (bs)
                    tp.add_grad(aid, g * B(0, 0));
                else
                    tp.add_grad(aid, g.cwiseProduct(B));
                if (bs)
                    tp.add_grad(bid, Matrix::Constant(1, 1, g.cwiseProduct(A).sum()));
                else if (as)
                    tp.add_grad(bid, g * A(0, 0));
                else
                    tp.add_grad(bid, g.cwiseProduct(A));
                break;
            case BinKind::Div:
                // y = A / B: dA = g / B, dB = -g * A / B^2
                if (as) {
                    tp.add_grad(aid, Matrix::Constant(1, 1, g.cwiseQuotient(B).sum()));
                    tp.add_grad(bid, ((-A(0, 0)) * g.array() / B.array().square()).matrix());
                } else if (bs) {
                    tp.add_grad(aid, Matrix(g / B(0, 0)));
                    tp.add_grad(bid, Matrix::Constant(
                                         1, 1, -(g.array() * A.array()).sum() / (B(0, 0) * B(0, 0))));
                } else {
                    tp.add_grad(aid, g.cwiseQuotient(B));
                    tp.add_grad(bid, (-(g.array() * A.array() / B.array().square())).matrix());
                }
                break;
        }
    });
    return t.var(id);
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinKind::Add, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinKind::Sub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinKind::Mul, "mul"); }
Var div(Var a, Var b) { return binary(a, b, BinKind::Div, "div"); }

Var add_scalar(Var v, double c) {
    Tape& t = *v.tape();
    int vid = v.id();
    int id = t.record((v.value().array() + c).matrix(), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) { tp.add_grad(vid, g); });
    return t.var(id);
}

Var scale(Var v, double c) {
    Tape& t = *v.tape();
    int vid = v.id();
    int id = t.record(v.value() * c, v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) { tp.add_grad(vid, Matrix(g * c)); });
    return t.var(id);
}

// ---- elementwise unaries ----------------------------------------------------

Var tanh(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    int out_id = static_cast<int>(t.size());  // id the new node will get
    int id = t.record(v.value().array().tanh().matrix(), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          const Matrix& y = tp.value_of(out_id);
                          tp.add_grad(vid, (g.array() * (1.0 - y.array().square())).matrix());
                      });
    return t.var(id);
}

Var sigmoid(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    int out_id = static_cast<int>(t.size());
    Matrix y = (1.0 / (1.0 + (-v.value().array()).exp())).matrix();
    int id = t.record(std::move(y), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        const Matrix& s = tp.value_of(out_id);
        tp.add_grad(vid, (g.array() * s.array() * (1.0 - s.array())).matrix());
    });
    return t.var(id);
}

Var exp(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    int out_id = static_cast<int>(t.size());
    int id = t.record(v.value().array().exp().matrix(), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          tp.add_grad(vid, (g.array() * tp.value_of(out_id).array()).matrix());
                      });
    return t.var(id);
}

Var log(Var v) {
    const Matrix& x = v.value();
    if ((x.array() <= 0.0).any())
        throw DomainError("log: input has non-positive entries");
    Tape& t = *v.tape();
    int vid = v.id();
    int id = t.record(x.array().log().matrix(), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          tp.add_grad(vid, (g.array() / tp.value_of(vid).array()).matrix());
                      });
    return t.var(id);
}

Var softplus(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    // max(x,0) + log1p(exp(-|x|)) is overflow-safe.
    Matrix y = v.value().unaryExpr(
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
    int id = t.record(std::move(y), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value_of(vid);
        tp.add_grad(vid, (g.array() / (1.0 + (-x.array()).exp())).matrix());
    });
    return t.var(id);
}

// ---- structural ops ---------------------------------------------------------

Var matmul(Var a, Var b) {
    require_same_tape(a, b, "matmul");
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a) + " x " +
                             shape_str(b));
    Tape& t = *a.tape();
    int aid = a.id(), bid = b.id();
    int id = t.record(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          tp.add_grad(aid, g * tp.value_of(bid).transpose());
                          tp.add_grad(bid, tp.value_of(aid).transpose() * g);
                      });
    return t.var(id);
}

Var transpose(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    int id = t.record(v.value().transpose(), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) { tp.add_grad(vid, g.transpose()); });
    return t.var(id);
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no operands");
    Tape& t = *parts[0].tape();
    Eigen::Index rows = parts[0].rows(), cols = 0;
    bool rg = false;
    for (const Var& p : parts) {
        require_same_tape(parts[0], p, "concat_cols");
        if (p.rows() != rows)
            throw DimensionError("concat_cols: row mismatch, " + shape_str(parts[0]) + " vs " +
                                 shape_str(p));
        cols += p.cols();
        rg = rg || p.requires_grad();
    }
    Matrix out(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> widths;
    Eigen::Index ofs = 0;
    for (const Var& p : parts) {
        out.middleCols(ofs, p.cols()) = p.value();
        ids.push_back(p.id());
        widths.push_back(p.cols());
        ofs += p.cols();
    }
    int id = t.record(std::move(out), rg, [ids, widths](Tape& tp, const Matrix& g) {
        Eigen::Index o = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
            tp.add_grad(ids[i], g.middleCols(o, widths[i]));
            o += widths[i];
        }
    });
    return t.var(id);
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: no operands");
    Tape& t = *rows[0].tape();
    Eigen::Index cols = rows[0].cols(), n = 0;
    bool rg = false;
    for (const Var& r : rows) {
        require_same_tape(rows[0], r, "stack_rows");
        if (r.cols() != cols)
            throw DimensionError("stack_rows: col mismatch, " + shape_str(rows[0]) + " vs " +
                                 shape_str(r));
        n += r.rows();
        rg = rg || r.requires_grad();
    }
    Matrix out(n, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> heights;
    Eigen::Index ofs = 0;
    for (const Var& r : rows) {
        out.middleRows(ofs, r.rows()) = r.value();
        ids.push_back(r.id());
        heights.push_back(r.rows());
        ofs += r.rows();
    }
    int id = t.record(std::move(out), rg, [ids, heights](Tape& tp, const Matrix& g) {
        Eigen::Index o = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
            tp.add_grad(ids[i], g.middleRows(o, heights[i]));
            o += heights[i];
        }
    });
    return t.var(id);
}

Var row(Var v, Eigen::Index i) {
    if (i < 0 || i >= v.rows())
        throw ContractError("row: index " + std::to_string(i) + " out of range for " +
                            shape_str(v));
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index rows = v.rows();
    int id = t.record(v.value().row(i), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          Matrix full = Matrix::Zero(rows, g.cols());
                          full.row(i) = g;
                          tp.add_grad(vid, full);
                      });
    return t.var(id);
}

Var entry(Var v, Eigen::Index i, Eigen::Index j) {
    if (i < 0 || i >= v.rows() || j < 0 || j >= v.cols())
        throw ContractError("entry: (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for " + shape_str(v));
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    int id = t.record(Matrix::Constant(1, 1, v.value()(i, j)), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          Matrix full = Matrix::Zero(r, c);
                          full(i, j) = g(0, 0);
                          tp.add_grad(vid, full);
                      });
    return t.var(id);
}

Var sum(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    int id = t.record(Matrix::Constant(1, 1, v.value().sum()), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          tp.add_grad(vid, Matrix::Constant(r, c, g(0, 0)));
                      });
    return t.var(id);
}

Var mean(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    double n = static_cast<double>(r * c);
    int id = t.record(Matrix::Constant(1, 1, v.value().sum() / n), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          tp.add_grad(vid, Matrix::Constant(r, c, g(0, 0) / n));
                      });
    return t.var(id);
}

Var tile_rows(Var v, Eigen::Index times) {
    if (times < 1) throw ContractError("tile_rows: times must be >= 1");
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    Matrix out(r * times, c);
    for (Eigen::Index b = 0; b < times; ++b) out.middleRows(b * r, r) = v.value();
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        Matrix acc = Matrix::Zero(r, c);
        for (Eigen::Index b = 0; b < times; ++b) acc += g.middleRows(b * r, r);
        tp.add_grad(vid, acc);
    });
    return t.var(id);
}

Var repeat_each_row(Var v, Eigen::Index times) {
    if (times < 1) throw ContractError("repeat_each_row: times must be >= 1");
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    Matrix out(r * times, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index b = 0; b < times; ++b) out.row(i * times + b) = v.value().row(i);
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        Matrix acc = Matrix::Zero(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index b = 0; b < times; ++b) acc.row(i) += g.row(i * times + b);
        tp.add_grad(vid, acc);
    });
    return t.var(id);
}

Var pad_cols(Var v, Eigen::Index total_cols) {
    if (total_cols < v.cols())
        throw DimensionError("pad_cols: target width " + std::to_string(total_cols) +
                             " smaller than " + shape_str(v));
    if (total_cols == v.cols()) return v;
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    Matrix out = Matrix::Zero(r, total_cols);
    out.leftCols(c) = v.value();
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        tp.add_grad(vid, g.leftCols(c));
    });
    return t.var(id);
}

Var reshape_rows(Var v, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != v.rows() * v.cols())
        throw DimensionError("reshape_rows: cannot reshape " + shape_str(v) + " to " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index vr = v.rows(), vc = v.cols();
    Matrix out(rows, cols);
    for (Eigen::Index k = 0; k < rows * cols; ++k)
        out(k / cols, k % cols) = v.value()(k / vc, k % vc);
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        Matrix back(vr, vc);
        for (Eigen::Index k = 0; k < vr * vc; ++k)
            back(k / vc, k % vc) = g(k / cols, k % cols);
        tp.add_grad(vid, back);
    });
    return t.var(id);
}

Var shift_rows_up(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    Matrix out = Matrix::Zero(r, c);
    if (r > 1) out.topRows(r - 1) = v.value().bottomRows(r - 1);
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        Matrix back = Matrix::Zero(r, c);
        if (r > 1) back.bottomRows(r - 1) = g.topRows(r - 1);
        tp.add_grad(vid, back);
    });
    return t.var(id);
}

Var shift_cols_left(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    Eigen::Index r = v.rows(), c = v.cols();
    Matrix out = Matrix::Zero(r, c);
    if (c > 1) out.leftCols(c - 1) = v.value().rightCols(c - 1);
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        Matrix back = Matrix::Zero(r, c);
        if (c > 1) back.rightCols(c - 1) = g.leftCols(c - 1);
        tp.add_grad(vid, back);
    });
    return t.var(id);
}

Var col_mul(Var a, Var u) {
    require_same_tape(a, u, "col_mul");
    if (u.rows() != 1 || u.cols() != a.cols())
        throw DimensionError("col_mul: gate must be 1x" + std::to_string(a.cols()) + ", got " +
                             shape_str(u));
    Tape& t = *a.tape();
    int aid = a.id(), uid = u.id();
    Matrix out = (a.value().array().rowwise() * u.value().row(0).array()).matrix();
    int id = t.record(std::move(out), a.requires_grad() || u.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          const Matrix& A = tp.value_of(aid);
                          const Matrix& U = tp.value_of(uid);
                          tp.add_grad(aid, (g.array().rowwise() * U.row(0).array()).matrix());
                          tp.add_grad(uid, g.cwiseProduct(A).colwise().sum());
                      });
    return t.var(id);
}

Var add_rowvec(Var a, Var b) {
    require_same_tape(a, b, "add_rowvec");
    if (b.rows() != 1 || b.cols() != a.cols())
        throw DimensionError("add_rowvec: bias must be 1x" + std::to_string(a.cols()) +
                             ", got " + shape_str(b));
    Tape& t = *a.tape();
    int aid = a.id(), bid = b.id();
    Matrix out = (a.value().array().rowwise() + b.value().row(0).array()).matrix();
    int id = t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          tp.add_grad(aid, g);
                          tp.add_grad(bid, g.colwise().sum());
                      });
    return t.var(id);
}

// ---- normalisation & selection ----------------------------------------------

Var softmax_rows(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    int out_id = static_cast<int>(t.size());
    const Matrix& x = v.value();
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::ArrayXd e = (x.row(i).array() - x.row(i).maxCoeff()).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        const Matrix& p = tp.value_of(out_id);
        Matrix din(p.rows(), p.cols());
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            double dot = g.row(i).cwiseProduct(p.row(i)).sum();
            din.row(i) = (p.row(i).array() * (g.row(i).array() - dot)).matrix();
        }
        tp.add_grad(vid, din);
    });
    return t.var(id);
}

Var log_softmax_rows(Var v) {
    Tape& t = *v.tape();
    int vid = v.id();
    int out_id = static_cast<int>(t.size());
    const Matrix& x = v.value();
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double m = x.row(i).maxCoeff();
        double lse = std::log((x.row(i).array() - m).exp().sum()) + m;
        out.row(i) = (x.row(i).array() - lse).matrix();
    }
    int id = t.record(std::move(out), v.requires_grad(), [=](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value_of(out_id);
        Matrix din(y.rows(), y.cols());
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            double gsum = g.row(i).sum();
            din.row(i) = (g.row(i).array() - y.row(i).array().exp() * gsum).matrix();
        }
        tp.add_grad(vid, din);
    });
    return t.var(id);
}

Var layer_norm(Var x, Var gain, Var bias) {
    require_same_tape(x, gain, "layer_norm");
    require_same_tape(x, bias, "layer_norm");
    if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
        bias.cols() != x.cols())
        throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(x.cols()) +
                             ", got " + shape_str(gain) + " and " + shape_str(bias));
    constexpr double kEps = 1e-5;
    Tape& t = *x.tape();
    int xid = x.id(), gid = gain.id(), bid = bias.id();
    const Matrix& xv = x.value();
    Eigen::Index r = xv.rows(), c = xv.cols();
    Matrix xhat(r, c);
    Eigen::ArrayXd inv_std(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        double mu = xv.row(i).mean();
        double var = (xv.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + kEps);
        xhat.row(i) = ((xv.row(i).array() - mu) * inv_std(i)).matrix();
    }
    Matrix out = ((xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
                  bias.value().row(0).array())
                     .matrix();
    int id = t.record(std::move(out),
                      x.requires_grad() || gain.requires_grad() || bias.requires_grad(),
                      [=](Tape& tp, const Matrix& g) {
                          const Matrix& gv = tp.value_of(gid);
                          Matrix dxhat = (g.array().rowwise() * gv.row(0).array()).matrix();
                          Matrix dx(r, c);
                          double n = static_cast<double>(c);
                          for (Eigen::Index i = 0; i < r; ++i) {
                              double m1 = dxhat.row(i).sum() / n;
                              double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).sum() / n;
                              dx.row(i) = ((dxhat.row(i).array() - m1 -
                                            xhat.row(i).array() * m2) *
                                           inv_std(i))
                                              .matrix();
                          }
                          tp.add_grad(xid, dx);
                          tp.add_grad(gid, g.cwiseProduct(xhat).colwise().sum());
                          tp.add_grad(bid, g.colwise().sum());
                      });
    return t.var(id);
}

Eigen::Index argmax_row(const Matrix& v) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < v.cols(); ++j)
        if (v(0, j) > v(0, best)) best = j;
    return best;
}

Var st_one_hot(Var v) {
    if (v.rows() != 1) throw ContractError("st_one_hot: expects a 1xN row, got " + shape_str(v));
    Tape& t = *v.tape();
    int vid = v.id();
    Matrix out = Matrix::Zero(1, v.cols());
    out(0, argmax_row(v.value())) = 1.0;
    int id = t.record(std::move(out), v.requires_grad(),
                      [=](Tape& tp, const Matrix& g) { tp.add_grad(vid, g); });
    return t.var(id);
}

}  // namespace plangen::ad
