#include "plangen/grad_check.hpp"

#include <cmath>

namespace plangen::ad {

const GradCheckEntry* GradCheckReport::worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries)
        if (!w || e.max_rel_err > w->max_rel_err) w = &e;
    return w;
}

namespace {

double eval_loss(const std::function<Var(Tape&)>& f) {
    Tape t;
    t.set_grad_enabled(false);
    Var loss = f(t);
    if (loss.rows() != 1 || loss.cols() != 1)
        throw ContractError("grad_check: f must produce a 1x1 loss");
    return loss.value()(0, 0);
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Tape&)>& f,
                           const std::vector<Parameter*>& params, double h, double tol,
                           double abs_floor) {
    // Determinism probe: the central-difference oracle is meaningless if
    // two identical evaluations disagree.
    double l0 = eval_loss(f);
    double l1 = eval_loss(f);
    if (l0 != l1)
        throw OracleError("grad_check: function is non-deterministic (" + std::to_string(l0) +
                          " vs " + std::to_string(l1) + ")");

    for (Parameter* p : params) p->zero_grad();
    {
        Tape t;
        Var loss = f(t);
        t.backward(loss);
    }

    GradCheckReport report;
    report.tol = tol;
    report.abs_floor = abs_floor;
    for (Parameter* p : params) {
        GradCheckEntry entry;
        entry.name = p->name;
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                const double saved = p->value(i, j);
                p->value(i, j) = saved + h;
                double lp = eval_loss(f);
                p->value(i, j) = saved - h;
                double lm = eval_loss(f);
                p->value(i, j) = saved;

                double fd = (lp - lm) / (2.0 * h);
                double taped = p->grad(i, j);
                double diff = std::abs(taped - fd);
                entry.max_abs_diff = std::max(entry.max_abs_diff, diff);
                double rel = diff <= abs_floor
                                 ? 0.0
                                 : diff / std::max(std::abs(taped), std::abs(fd));
                entry.max_rel_err = std::max(entry.max_rel_err, rel);
            }
        }
        entry.pass = entry.max_rel_err <= tol;
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace plangen::ad
