// Training-based acceptance criteria at desk scale: copy-task learning,
// the 4-node Eulerian task, and the convergence race.

#include "criteria.hpp"

int main() {
    acceptance::Runner runner;
    runner.run("criterion 4: copy task, PAG hidden 64 reaches 99% within 20k updates",
               acceptance::copy_task_learning);
    runner.run("criterion 5: euler 4-node, baseline and PAG reach 95% test accuracy",
               acceptance::euler4_accuracy);
    runner.run("criterion 7: PAG reaches NLL 0.1 in no more updates than baseline",
               acceptance::convergence_race);
    return runner.failures == 0 ? 0 : 1;
}
