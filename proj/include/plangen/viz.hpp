#pragma once

#include <string>
#include <vector>

#include "plangen/model.hpp"

namespace plangen::viz {

// alpha in [0,1] maps to 0 -> white, 1 -> black; one pixel per (t, i) cell.
void write_heatmap_pgm(const std::string& path, const ad::Matrix& alpha);

// First row: source tokens; then one row per decode step, labelled with the
// emitted token.
void write_alignment_csv(const std::string& path, const ad::Matrix& alphas,
                         const std::vector<std::string>& source_tokens,
                         const std::vector<std::string>& target_tokens);

struct DumpResult {
    std::vector<std::string> files;
    int instances = 0;
};

// Greedy-decodes each selected instance and writes, per instance, the
// alignment CSV + PGM heatmap; for PAG also the full plan at each commit
// step, and for PAG/rPAG the commitment trace g_1..g_T.
DumpResult dump_alignments(model::Seq2SeqModel& m, const tasks::Dataset& data,
                           const std::vector<size_t>& indices, const std::string& out_dir,
                           int max_len);

}  // namespace plangen::viz
