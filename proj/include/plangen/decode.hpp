#pragma once

#include <vector>

#include "plangen/model.hpp"

namespace plangen::decode {

struct DecodeTrace {
    std::vector<int> tokens;  // EOS-terminated when finished
    ad::Matrix alphas;        // steps x |X|
    std::vector<int> commits;            // g_t per step (pag/rpag)
    std::vector<ad::Matrix> plans;       // plan snapshots at PAG commit steps
    std::vector<int> plan_steps;         // 1-based step of each snapshot
    double logp = 0.0;                   // accumulated log-probability
    bool finished = false;               // ended with EOS
    bool warning_unfinished = false;     // beam exhausted the step budget
};

// Argmax decoding with zero Gumbel noise; deterministic.
DecodeTrace greedy_decode(model::Seq2SeqModel& m, const std::vector<int>& source,
                          int max_len);

// Standard beam search. Finished hypotheses retire to a pool and the best
// (optionally length-normalised) finished one is returned; if nothing
// finishes within max_len the best unfinished hypothesis is returned with
// warning_unfinished set. Planner state is snapshotted per hypothesis.
DecodeTrace beam_search(model::Seq2SeqModel& m, const std::vector<int>& source,
                        int beam_width, int max_len, bool length_norm);

}  // namespace plangen::decode
