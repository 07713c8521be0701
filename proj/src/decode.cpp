#include "plangen/decode.hpp"

#include <algorithm>

#include "plangen/errors.hpp"

namespace plangen::decode {

using model::Seq2SeqModel;

namespace {

ad::Matrix rows_to_matrix(const std::vector<ad::Matrix>& rows) {
    if (rows.empty()) return {};
    ad::Matrix out(static_cast<Eigen::Index>(rows.size()), rows[0].cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i];
    return out;
}

}  // namespace

DecodeTrace greedy_decode(Seq2SeqModel& m, const std::vector<int>& source, int max_len) {
    if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
    ad::Tape t;
    t.set_grad_enabled(false);
    planner::NoiseFn noise = planner::zero_noise();

    nn::EncoderAnnotations ann = m.encode(t, source);
    Seq2SeqModel::DecState state = m.init_decoder(t, ann);

    DecodeTrace trace;
    std::vector<ad::Matrix> alpha_rows;
    int prev = m.config.bos_id;
    for (int step = 0; step < max_len; ++step) {
        auto out = m.decode_step(t, state, ann, prev, noise);
        int tok = static_cast<int>(ad::argmax_row(out.logp.value()));
        trace.logp += out.logp.value()(0, tok);
        trace.tokens.push_back(tok);
        alpha_rows.push_back(out.alpha.value());
        if (out.g >= 0) trace.commits.push_back(out.g);
        if (out.committed && out.plan_snapshot.size() != 0) {
            trace.plans.push_back(out.plan_snapshot);
            trace.plan_steps.push_back(step + 1);
        }
        if (tok == m.config.eos_id) {
            trace.finished = true;
            break;
        }
        prev = tok;
    }
    trace.alphas = rows_to_matrix(alpha_rows);
    return trace;
}

namespace {

struct Hypothesis {
    std::vector<int> tokens;
    double logp = 0.0;
    Seq2SeqModel::DecState state;
    std::vector<ad::Matrix> alpha_rows;
    std::vector<int> commits;
};

DecodeTrace to_trace(Hypothesis hyp, bool finished) {
    DecodeTrace trace;
    trace.tokens = std::move(hyp.tokens);
    trace.logp = hyp.logp;
    trace.finished = finished;
    trace.alphas = rows_to_matrix(hyp.alpha_rows);
    trace.commits = std::move(hyp.commits);
    return trace;
}

}  // namespace

DecodeTrace beam_search(Seq2SeqModel& m, const std::vector<int>& source, int beam_width,
                        int max_len, bool length_norm) {
    if (beam_width < 1) throw ContractError("beam_search: beam_width must be >= 1");
    if (beam_width == 1) return greedy_decode(m, source, max_len);
    if (max_len < 1) throw ContractError("beam_search: max_len must be >= 1");

    ad::Tape t;
    t.set_grad_enabled(false);
    planner::NoiseFn noise = planner::zero_noise();

    nn::EncoderAnnotations ann = m.encode(t, source);

    std::vector<Hypothesis> active(1);
    active[0].state = m.init_decoder(t, ann);
    std::vector<Hypothesis> pool;

    struct Candidate {
        double score;
        int token;
        size_t parent;
    };

    for (int step = 0; step < max_len && !active.empty(); ++step) {
        // One decoder step per hypothesis: the state transition depends on
        // the previously chosen token only, so all continuations of a
        // hypothesis share it. Candidates copy the advanced hypothesis, so
        // expanding one never mutates a sibling's planner state.
        std::vector<Candidate> candidates;
        for (size_t hi = 0; hi < active.size(); ++hi) {
            Hypothesis& hyp = active[hi];
            int prev = hyp.tokens.empty() ? m.config.bos_id : hyp.tokens.back();
            auto out = m.decode_step(t, hyp.state, ann, prev, noise);
            hyp.alpha_rows.push_back(out.alpha.value());
            if (out.g >= 0) hyp.commits.push_back(out.g);
            const ad::Matrix& logp = out.logp.value();
            for (int v = 0; v < static_cast<int>(logp.cols()); ++v)
                candidates.push_back({hyp.logp + logp(0, v), v, hi});
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) {
                             if (a.score != b.score) return a.score > b.score;
                             if (a.parent != b.parent) return a.parent < b.parent;
                             return a.token < b.token;
                         });

        std::vector<Hypothesis> next_active;
        int selected = 0;
        for (const Candidate& c : candidates) {
            if (selected >= beam_width) break;
            ++selected;
            Hypothesis h = active[c.parent];
            h.tokens.push_back(c.token);
            h.logp = c.score;
            if (c.token == m.config.eos_id)
                pool.push_back(std::move(h));
            else
                next_active.push_back(std::move(h));
        }
        active = std::move(next_active);
    }

    auto final_score = [&](const Hypothesis& h) {
        return length_norm && !h.tokens.empty()
                   ? h.logp / static_cast<double>(h.tokens.size())
                   : h.logp;
    };
    if (!pool.empty()) {
        size_t best = 0;
        for (size_t i = 1; i < pool.size(); ++i)
            if (final_score(pool[i]) > final_score(pool[best])) best = i;
        return to_trace(std::move(pool[best]), true);
    }
    // Nothing finished within the budget.
    size_t best = 0;
    for (size_t i = 1; i < active.size(); ++i)
        if (final_score(active[i]) > final_score(active[best])) best = i;
    DecodeTrace trace = to_trace(std::move(active[best]), false);
    trace.warning_unfinished = true;
    return trace;
}

}  // namespace plangen::decode
