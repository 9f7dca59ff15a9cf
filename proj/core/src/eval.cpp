#include "walker/eval.hpp"

#include <algorithm>

namespace walker {

namespace {

void check_lengths(std::span<const Behaviour> actual,
                   std::span<const Behaviour> predicted) {
  if (actual.size() != predicted.size()) {
    throw DataError("sequence length mismatch: actual " +
                    std::to_string(actual.size()) + ", predicted " +
                    std::to_string(predicted.size()));
  }
  if (actual.empty()) throw DataError("empty sequences");
}

bool window_match(std::span<const Behaviour> actual,
                  std::span<const Behaviour> predicted, size_t t, int window) {
  const size_t T = actual.size();
  size_t lo = t >= static_cast<size_t>(window) ? t - window : 0;
  size_t hi = std::min(T - 1, t + static_cast<size_t>(window));
  for (size_t u = lo; u <= hi; ++u) {
    if (predicted[u] == actual[t]) return true;
  }
  return false;
}

struct Transition {
  size_t t;
  Behaviour from;
  Behaviour to;
};

std::vector<Transition> transitions_of(std::span<const Behaviour> seq) {
  std::vector<Transition> out;
  for (size_t t = 1; t < seq.size(); ++t) {
    if (seq[t] != seq[t - 1]) out.push_back({t, seq[t - 1], seq[t]});
  }
  return out;
}

double safe_ratio(long num, long den) { return den == 0 ? 0.0 : double(num) / den; }

}  // namespace

double windowed_accuracy(std::span<const Behaviour> actual,
                         std::span<const Behaviour> predicted, int window) {
  check_lengths(actual, predicted);
  if (window < 0) throw DataError("window must be >= 0");
  long correct = 0;
  for (size_t t = 0; t < actual.size(); ++t) {
    if (window_match(actual, predicted, t, window)) ++correct;
  }
  return double(correct) / actual.size();
}

std::vector<std::vector<long>> windowed_confusion(
    std::span<const Behaviour> actual, std::span<const Behaviour> predicted,
    int window, const LabelSet& label_set) {
  check_lengths(actual, predicted);
  const int m = label_set.size();
  std::vector<std::vector<long>> confusion(m, std::vector<long>(m, 0));
  for (size_t t = 0; t < actual.size(); ++t) {
    int row = label_set.index_of(actual[t]);
    int col = window_match(actual, predicted, t, window)
                  ? row
                  : label_set.index_of(predicted[t]);
    confusion[row][col] += 1;
  }
  return confusion;
}

TransitionMetrics transition_metrics(std::span<const Behaviour> actual,
                                     std::span<const Behaviour> predicted,
                                     int window) {
  check_lengths(actual, predicted);
  std::vector<Transition> at = transitions_of(actual);
  std::vector<Transition> pt = transitions_of(predicted);

  TransitionMetrics metrics;
  metrics.actual = static_cast<long>(at.size());
  metrics.predicted = static_cast<long>(pt.size());

  std::vector<bool> used(at.size(), false);
  for (const Transition& p : pt) {
    for (size_t i = 0; i < at.size(); ++i) {
      if (used[i] || at[i].from != p.from || at[i].to != p.to) continue;
      long dt = static_cast<long>(at[i].t) - static_cast<long>(p.t);
      if (dt < -window || dt > window) continue;
      used[i] = true;
      metrics.correctly_predicted += 1;
      break;
    }
  }
  metrics.cpt_over_at = safe_ratio(metrics.correctly_predicted, metrics.actual);
  metrics.cpt_over_pt =
      safe_ratio(metrics.correctly_predicted, metrics.predicted);
  return metrics;
}

EvalReport evaluate(std::span<const Behaviour> actual,
                    std::span<const Behaviour> predicted, int window,
                    const LabelSet& label_set) {
  EvalReport report;
  report.window = window;
  report.ticks = static_cast<long>(actual.size());
  report.confusion = windowed_confusion(actual, predicted, window, label_set);
  const int m = label_set.size();
  report.per_behaviour_accuracy.resize(m);
  for (int b = 0; b < m; ++b) {
    long row_sum = 0;
    for (long v : report.confusion[b]) row_sum += v;
    report.correct += report.confusion[b][b];
    report.per_behaviour_accuracy[b] =
        row_sum == 0 ? 0.0 : double(report.confusion[b][b]) / row_sum;
  }
  report.overall_accuracy = double(report.correct) / report.ticks;
  report.transitions = transition_metrics(actual, predicted, window);
  return report;
}

EvalReport pool_reports(std::span<const EvalReport> reports) {
  if (reports.empty()) throw DataError("pool_reports: nothing to pool");
  EvalReport pooled;
  pooled.window = reports.front().window;
  const size_t m = reports.front().confusion.size();
  pooled.confusion.assign(m, std::vector<long>(m, 0));
  for (const EvalReport& r : reports) {
    if (r.window != pooled.window || r.confusion.size() != m) {
      throw DataError("pool_reports: mismatched reports");
    }
    pooled.ticks += r.ticks;
    pooled.correct += r.correct;
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < m; ++j) pooled.confusion[i][j] += r.confusion[i][j];
    }
    pooled.transitions.actual += r.transitions.actual;
    pooled.transitions.predicted += r.transitions.predicted;
    pooled.transitions.correctly_predicted += r.transitions.correctly_predicted;
  }
  pooled.per_behaviour_accuracy.resize(m);
  for (size_t b = 0; b < m; ++b) {
    long row_sum = 0;
    for (long v : pooled.confusion[b]) row_sum += v;
    pooled.per_behaviour_accuracy[b] =
        row_sum == 0 ? 0.0 : double(pooled.confusion[b][b]) / row_sum;
  }
  pooled.overall_accuracy = double(pooled.correct) / pooled.ticks;
  pooled.transitions.cpt_over_at = safe_ratio(
      pooled.transitions.correctly_predicted, pooled.transitions.actual);
  pooled.transitions.cpt_over_pt = safe_ratio(
      pooled.transitions.correctly_predicted, pooled.transitions.predicted);
  return pooled;
}

std::vector<int> default_window_grid() {
  std::vector<int> grid;
  for (int x = 0; x <= 50; x += 5) grid.push_back(x);
  return grid;
}

}  // namespace walker
