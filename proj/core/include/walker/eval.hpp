#pragma once

#include <span>
#include <vector>

#include "walker/types.hpp"

namespace walker {

struct TransitionMetrics {
  long actual = 0;              // AT
  long predicted = 0;           // PT
  long correctly_predicted = 0; // CPT
  double cpt_over_at = 0;       // reported as "precision"
  double cpt_over_pt = 0;       // reported as "recall"
};

struct EvalReport {
  int window = 0;
  long ticks = 0;
  long correct = 0;
  double overall_accuracy = 0;
  std::vector<std::vector<long>> confusion;     // m x m, rows = actual
  std::vector<double> per_behaviour_accuracy;   // diagonal / row sum
  TransitionMetrics transitions;
};

// Tick t counts as correct if the actual behaviour appears anywhere in the
// predicted sequence within +-window ticks.
double windowed_accuracy(std::span<const Behaviour> actual,
                         std::span<const Behaviour> predicted, int window);

// Window-matched ticks land on the diagonal; misses go to the time-t
// prediction, so diagonal/row-sum reproduces the windowed accuracy.
std::vector<std::vector<long>> windowed_confusion(
    std::span<const Behaviour> actual, std::span<const Behaviour> predicted,
    int window, const LabelSet& label_set);

// AT/PT/CPT transition counts. With window > 0, a predicted transition
// matches an actual transition with the same (from, to) pair within +-window
// ticks; each actual transition is matchable at most once.
TransitionMetrics transition_metrics(std::span<const Behaviour> actual,
                                     std::span<const Behaviour> predicted,
                                     int window);

EvalReport evaluate(std::span<const Behaviour> actual,
                    std::span<const Behaviour> predicted, int window,
                    const LabelSet& label_set);

// Tick-weighted pooling: confusion matrices and transition counts add up,
// accuracies are recomputed from the totals.
EvalReport pool_reports(std::span<const EvalReport> reports);

std::vector<int> default_window_grid();  // 0, 5, ..., 50

}  // namespace walker
