#include "plangen/planner.hpp"

#include "plangen/errors.hpp"

namespace plangen::planner {

Mode mode_from_string(const std::string& s) {
    if (s == "baseline") return Mode::Baseline;
    if (s == "pag") return Mode::Pag;
    if (s == "rpag") return Mode::Rpag;
    throw ConfigError("unknown mode '" + s + "' (expected baseline|pag|rpag)");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Baseline: return "baseline";
        case Mode::Pag: return "pag";
        case Mode::Rpag: return "rpag";
    }
    return "?";
}

void PlannerConfig::validate() const {
    if (k < 1) throw ConfigError("planner: k must be >= 1");
    if (lambda_com < 0) throw ConfigError("planner: lambda_com must be >= 0");
    if (summary_dim < 1) throw ConfigError("planner: summary_dim must be >= 1");
}

NoiseFn zero_noise() {
    return [](int k) { return Eigen::RowVectorXd::Zero(k).eval(); };
}

NoiseFn seeded_noise(std::shared_ptr<Rng> rng) {
    return [rng](int k) {
        Eigen::RowVectorXd n(k);
        for (int i = 0; i < k; ++i) n(i) = rng->gumbel();
        return n;
    };
}

NoiseFn FrozenNoise::fn() {
    return [this](int k) {
        if (next_ == drawn_.size()) {
            Eigen::RowVectorXd n(k);
            for (int i = 0; i < k; ++i) n(i) = rng_.gumbel();
            drawn_.push_back(n);
        }
        return drawn_[next_++];
    };
}

int CommitmentPlan::hot_index() const {
    return static_cast<int>(ad::argmax_row(discrete.value()));
}

std::vector<Parameter*> PlannerParams::params(Mode mode) {
    std::vector<Parameter*> out;
    auto append = [&](std::vector<Parameter*> ps) {
        out.insert(out.end(), ps.begin(), ps.end());
    };
    switch (mode) {
        case Mode::Baseline:
            append(f_att.params());
            break;
        case Mode::Pag:
            append(f_align.params());
            append(f_r.params());
            append(f_up.params());
            append(f_c.params());
            out.push_back(&temp_raw);
            break;
        case Mode::Rpag:
            append(f_align.params());
            append(f_c.params());
            out.push_back(&temp_raw);
            break;
    }
    return out;
}

// ---- initialisation -----------------------------------------------------------

namespace {

CommitmentPlan ones_commitment(Tape& t, int k) {
    CommitmentPlan c;
    c.soft = t.ones(1, k);
    ad::Matrix hot = ad::Matrix::Zero(1, k);
    hot(0, 0) = 1.0;  // all-ones tie resolves to the lowest index
    c.discrete = t.constant(hot);
    return c;
}

}  // namespace

PlannerState init_plans(Tape& t, int k, int src_len) {
    if (k < 1 || src_len < 1)
        throw ContractError("init_plans: k and src_len must be positive, got k=" +
                            std::to_string(k) + " src_len=" + std::to_string(src_len));
    PlannerState s;
    s.plan = t.ones(k, src_len);
    s.commitment = ones_commitment(t, k);
    return s;
}

PlannerState init_repeat_state(Tape& t, int k, int src_len, int annotation_dim) {
    if (k < 1 || src_len < 1)
        throw ContractError("init_repeat_state: k and src_len must be positive");
    PlannerState s;
    s.commitment = ones_commitment(t, k);
    s.alpha_prev = t.constant(ad::Matrix::Constant(1, src_len, 1.0 / src_len));
    s.psi_prev = t.zeros(1, annotation_dim);
    return s;
}

// ---- plan mechanics -------------------------------------------------------------

Var shift_plan(Var plan) { return ad::shift_rows_up(plan); }

void shift_commitment(CommitmentPlan& c) {
    c.soft = ad::shift_cols_left(c.soft);
    c.discrete = ad::shift_cols_left(c.discrete);
}

Var plan_summary(Tape& t, nn::Mlp& f_r, Var plan_prev, int row) {
    if (row < 0 || row >= plan_prev.rows())
        throw ContractError("plan_summary: row " + std::to_string(row) +
                            " out of range for plan with " + std::to_string(plan_prev.rows()) +
                            " rows");
    return f_r.apply(t, ad::pad_cols(ad::row(plan_prev, row), f_r.in_dim()));
}

Var candidate_plan(Tape& t, nn::Mlp& f_align, Var s_prev, const nn::EncoderAnnotations& ann,
                   Var summaries, Var y) {
    const Eigen::Index k = summaries.rows();
    const Eigen::Index n = ann.matrix.rows();
    // Row r = i*n + j carries [s_prev, h_j, beta_i, y].
    Var grid = ad::concat_cols({ad::tile_rows(s_prev, k * n), ad::tile_rows(ann.matrix, k),
                                ad::repeat_each_row(summaries, n), ad::tile_rows(y, k * n)});
    Var scores = f_align.apply(t, grid);  // (k*n) x 1
    return ad::reshape_rows(scores, k, n);
}

Var temperature(Tape& t, Parameter& temp_raw) {
    return ad::add_scalar(ad::softplus(t.watch(temp_raw)), 0.1);
}

CommitmentPlan gumbel_softmax_st(Tape& t, Var logits, Var temperature,
                                 const Eigen::RowVectorXd& noise) {
    if (temperature.value()(0, 0) <= 0.0)
        throw DomainError("gumbel_softmax_st: temperature must be positive, got " +
                          std::to_string(temperature.value()(0, 0)));
    if (noise.cols() != logits.cols())
        throw DimensionError("gumbel_softmax_st: noise width " + std::to_string(noise.cols()) +
                             " vs logits width " + std::to_string(logits.cols()));
    Var noisy = ad::add(logits, t.constant(noise));
    CommitmentPlan c;
    c.soft = ad::softmax_rows(ad::div(noisy, temperature));
    c.discrete = ad::st_one_hot(c.soft);
    c.temperature = temperature.value()(0, 0);
    return c;
}

// ---- per-step updates -------------------------------------------------------------

namespace {

void recompute_commitment(Tape& t, PlannerState& state, Var logits, PlannerParams& params,
                          const NoiseFn& noise) {
    Var temp = temperature(t, params.temp_raw);
    state.commitment = gumbel_softmax_st(t, logits, temp, noise(static_cast<int>(logits.cols())));
}

}  // namespace

Var pag_step(Tape& t, PlannerState& state, Var s_prev, const nn::EncoderAnnotations& ann,
             Var y, PlannerParams& params, const NoiseFn& noise) {
    if (!state.plan.valid() || !state.commitment.soft.valid())
        throw ContractError("pag_step: state not initialised via init_plans");

    if (state.commitment.switch_on()) {
        ++state.commits;
        recompute_commitment(t, state, params.f_c.apply(t, s_prev), params, noise);

        Var padded = ad::pad_cols(state.plan, params.f_r.in_dim());
        Var summaries = params.f_r.apply(t, padded);  // k x summary_dim
        Var cand = candidate_plan(t, params.f_align, s_prev, ann, summaries, y);

        // Update gate per source position: u_i = f_up([h_i, s_prev]).
        Var gate_in = ad::concat_cols({ann.matrix, ad::tile_rows(s_prev, ann.matrix.rows())});
        Var u = ad::transpose(params.f_up.apply(t, gate_in));  // 1 x |X|
        state.plan =
            ad::add(ad::col_mul(state.plan, ad::one_minus(u)), ad::col_mul(cand, u));
    } else {
        state.plan = shift_plan(state.plan);
        shift_commitment(state.commitment);
    }
    return ad::softmax_rows(ad::row(state.plan, 0));
}

Var rpag_step(Tape& t, PlannerState& state, Var s_prev, const nn::EncoderAnnotations& ann,
              Var y, PlannerParams& params, const NoiseFn& noise) {
    if (!state.alpha_prev.valid() || !state.commitment.soft.valid())
        throw ContractError("rpag_step: state not initialised via init_repeat_state");

    if (state.commitment.switch_on()) {
        ++state.commits;
        Var logits = params.f_c.apply(t, ad::concat_cols({s_prev, state.psi_prev}));
        recompute_commitment(t, state, logits, params, noise);

        const Eigen::Index n = ann.matrix.rows();
        Var grid = ad::concat_cols(
            {ad::tile_rows(s_prev, n), ann.matrix, ad::tile_rows(y, n)});
        Var scores = params.f_align.apply(t, grid);  // n x 1
        state.alpha_prev = ad::softmax_rows(ad::transpose(scores));
    } else {
        shift_commitment(state.commitment);
    }
    return state.alpha_prev;
}

Var baseline_attention(Tape& t, nn::Mlp& f_att, Var s_prev,
                       const nn::EncoderAnnotations& ann) {
    const Eigen::Index n = ann.matrix.rows();
    Var grid = ad::concat_cols({ad::tile_rows(s_prev, n), ann.matrix});
    Var scores = f_att.apply(t, grid);  // n x 1
    return ad::softmax_rows(ad::transpose(scores));
}

Var commitment_penalty(Tape& t, const std::vector<Var>& soft_commits, int k, double lambda) {
    if (soft_commits.empty()) return t.scalar(0.0);
    Var uniform = t.constant(ad::Matrix::Constant(1, k, 1.0 / k));
    Var total = t.scalar(0.0);
    for (const Var& c : soft_commits) {
        if (c.cols() != k)
            throw DimensionError("commitment_penalty: c_t has length " +
                                 std::to_string(c.cols()) + ", expected " + std::to_string(k));
        Var d = ad::sub(uniform, c);
        total = ad::add(total, ad::sum(ad::mul(d, d)));
    }
    return ad::scale(total, lambda);
}

}  // namespace plangen::planner
