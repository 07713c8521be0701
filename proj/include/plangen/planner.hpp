#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "plangen/layers.hpp"
#include "plangen/rng.hpp"
#include "plangen/tape.hpp"

namespace plangen::planner {

using ad::Parameter;
using ad::Tape;
using ad::Var;

enum class Mode { Baseline, Pag, Rpag };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct PlannerConfig {
    int k = 10;
    Mode mode = Mode::Pag;
    double lambda_com = 1e-3;
    int summary_dim = 16;
    uint64_t gumbel_seed = 0;

    void validate() const;
};

// Produces one 1xk row of Gumbel samples per commit decision.
using NoiseFn = std::function<Eigen::RowVectorXd(int)>;

NoiseFn zero_noise();
NoiseFn seeded_noise(std::shared_ptr<Rng> rng);

// Replayable noise for finite-difference checks: samples are drawn once and
// replayed in order on every forward pass. rewind() before each pass.
class FrozenNoise {
public:
    explicit FrozenNoise(uint64_t seed) : rng_(seed) {}
    NoiseFn fn();
    void rewind() { next_ = 0; }

private:
    Rng rng_;
    std::vector<Eigen::RowVectorXd> drawn_;
    size_t next_ = 0;
};

// Soft commitment vector c_t, its one-hot discretisation, and the switch.
// `discrete` is a straight-through node: its forward value is the one-hot,
// its backward passes gradients to the soft path unchanged.
struct CommitmentPlan {
    Var soft;      // 1 x k
    Var discrete;  // 1 x k, exactly one-hot
    double temperature = 1.0;  // value at the last recompute

    bool switch_on() const { return discrete.value()(0, 0) == 1.0; }
    int hot_index() const;
};

// Mode-dependent parameter bundle. Only the members a mode uses are
// constructed; params(mode) lists exactly those.
struct PlannerParams {
    nn::Mlp f_align;  // candidate plan entries (pag) / alignment scores (rpag)
    nn::Mlp f_r;      // plan-row summary, input padded to max_src_len
    nn::Mlp f_up;     // per-column update gate, sigmoid output
    nn::Mlp f_c;      // commitment logits (single layer)
    nn::Mlp f_att;    // baseline attention scores
    Parameter temp_raw;  // 1x1; temperature = softplus(raw) + 0.1

    std::vector<Parameter*> params(Mode mode);
};

// Per-decode planner state. PAG keeps the k x |X| plan; rPAG keeps only the
// previous alignment vector and context.
struct PlannerState {
    Var plan;        // k x |X| (pag)
    CommitmentPlan commitment;
    Var alpha_prev;  // 1 x |X| (rpag)
    Var psi_prev;    // 1 x annotation_dim (rpag)
    long commits = 0;
};

// Alignment plan and commitment plan initialised with ones; the all-ones
// tie discretises to index 0, so the first step always recomputes.
PlannerState init_plans(Tape& t, int k, int src_len);

// rPAG variant: no plan matrix, alpha/psi slots zeroed.
PlannerState init_repeat_state(Tape& t, int k, int src_len, int annotation_dim);

// The shift function rho: rows move up one slot, vacated last row is zero.
Var shift_plan(Var plan);

// Shifts soft and discrete left with a 0 appended; the switch is whatever
// lands in slot 0.
void shift_commitment(CommitmentPlan& c);

// beta_i = f_r(A[row]), with the plan row zero-padded to f_r's input width.
Var plan_summary(Tape& t, nn::Mlp& f_r, Var plan_prev, int row);

// Candidate alignment-plan matrix: entry (i, j) is the scalar output of
// f_align on [s_prev, h_j, beta_i, y]. Raw logits, no softmax.
Var candidate_plan(Tape& t, nn::Mlp& f_align, Var s_prev, const nn::EncoderAnnotations& ann,
                   Var summaries, Var y);

// soft = softmax((logits + noise) / temperature), discrete = straight-through
// one-hot of the soft argmax (lowest index wins ties).
CommitmentPlan gumbel_softmax_st(Tape& t, Var logits, Var temperature,
                                 const Eigen::RowVectorXd& noise);

// Current temperature from the raw parameter: softplus(raw) + 0.1.
Var temperature(Tape& t, Parameter& temp_raw);

// One PAG decoder-step: recompute (commit) or shift, then alpha from row 0.
Var pag_step(Tape& t, PlannerState& state, Var s_prev, const nn::EncoderAnnotations& ann,
             Var y, PlannerParams& params, const NoiseFn& noise);

// One rPAG decoder-step: recompute alignment on commit, otherwise reuse it.
Var rpag_step(Tape& t, PlannerState& state, Var s_prev, const nn::EncoderAnnotations& ann,
              Var y, PlannerParams& params, const NoiseFn& noise);

// Standard attention MLP over [s_prev, h_j]; no plan, no commitment.
Var baseline_attention(Tape& t, nn::Mlp& f_att, Var s_prev,
                       const nn::EncoderAnnotations& ann);

// lambda * sum_t sum_i (1/k - c_ti)^2
Var commitment_penalty(Tape& t, const std::vector<Var>& soft_commits, int k, double lambda);

}  // namespace plangen::planner
