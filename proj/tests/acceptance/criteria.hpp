#pragma once

#include <functional>
#include <string>
#include <utility>

namespace acceptance {

// Each criterion returns (pass, detail). The runner prints one line per
// criterion and remembers overall state for the exit code.
struct Runner {
    int failures = 0;
    void run(const std::string& name,
             const std::function<std::pair<bool, std::string>()>& fn);
};

std::pair<bool, std::string> gradient_fidelity();      // criterion 1
std::pair<bool, std::string> mechanism_invariants();   // criterion 2
std::pair<bool, std::string> oracle_equivalence();     // criterion 3
std::pair<bool, std::string> copy_task_learning();     // criterion 4
std::pair<bool, std::string> euler4_accuracy();        // criterion 5
std::pair<bool, std::string> euler7_directional();     // criterion 6
std::pair<bool, std::string> convergence_race();       // criterion 7
std::pair<bool, std::string> alignment_dump_smoke();   // criterion 8

}  // namespace acceptance
