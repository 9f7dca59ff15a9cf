#include "walker/crf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

namespace walker {

ThresholdBank::ThresholdBank(int m, int n)
    : m_(m),
      n_(n),
      thresholds_(static_cast<size_t>(m) * (m - 1) * n, 0.0),
      relevance_(static_cast<size_t>(m) * (m - 1) * n, true) {
  if (m < 2 || n < 1) throw DataError("ThresholdBank: need m >= 2, n >= 1");
}

int ThresholdBank::pair_index(int b, int b2) const {
  if (b == b2 || b < 0 || b2 < 0 || b >= m_ || b2 >= m_) {
    throw DataError("ThresholdBank: bad pair");
  }
  return b * (m_ - 1) + (b2 < b ? b2 : b2 - 1);
}

int ThresholdBank::entry_index(int b, int b2, int k) const {
  if (k < 0 || k >= n_) throw DataError("ThresholdBank: bad feature index");
  return pair_index(b, b2) * n_ + k;
}

double ThresholdBank::threshold(int b, int b2, int k) const {
  return thresholds_[entry_index(b, b2, k)];
}

bool ThresholdBank::relevant(int b, int b2, int k) const {
  return relevance_[entry_index(b, b2, k)];
}

void ThresholdBank::set(int b, int b2, int k, double threshold, bool relevant) {
  int i = entry_index(b, b2, k);
  thresholds_[i] = threshold;
  relevance_[i] = relevant;
}

void ThresholdBank::set_raw(std::vector<double> thresholds,
                            std::vector<bool> relevance) {
  if (thresholds.size() != thresholds_.size() ||
      relevance.size() != relevance_.size()) {
    throw DataError("ThresholdBank: raw size mismatch");
  }
  thresholds_ = std::move(thresholds);
  relevance_ = std::move(relevance);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Overlap coefficient of two empirical distributions via shared-range
// histograms.
double overlap_coefficient(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : b) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (!(hi > lo)) return 1.0;  // all values identical
  constexpr int kBins = 32;
  std::vector<double> pa(kBins, 0), pb(kBins, 0);
  auto bin_of = [&](double v) {
    int i = static_cast<int>((v - lo) / (hi - lo) * kBins);
    return std::clamp(i, 0, kBins - 1);
  };
  for (double v : a) pa[bin_of(v)] += 1.0 / a.size();
  for (double v : b) pb[bin_of(v)] += 1.0 / b.size();
  double ovl = 0;
  for (int i = 0; i < kBins; ++i) ovl += std::min(pa[i], pb[i]);
  return ovl;
}

double logsumexp(std::span<const double> v) {
  double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double sum = 0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

}  // namespace

ThresholdBank fit_thresholds(const Dataset& data, double overlap_cutoff) {
  const int m = data.label_set.size();
  if (data.sequences.empty()) throw DataError("fit_thresholds: no sequences");
  const int n = data.sequences.front().width();

  // Pool feature values per class.
  std::vector<std::vector<std::vector<double>>> by_class(
      m, std::vector<std::vector<double>>(n));
  std::vector<double> global_sum(n, 0);
  long total = 0;
  for (const auto& seq : data.sequences) {
    if (!seq.labels) throw DataError("fit_thresholds: unlabeled sequence");
    if (seq.width() != n) throw DataError("fit_thresholds: mixed widths");
    for (int t = 0; t < seq.length(); ++t) {
      int b = data.label_set.index_of((*seq.labels)[t]);
      for (int k = 0; k < n; ++k) {
        by_class[b][k].push_back(seq.values[t][k]);
        global_sum[k] += seq.values[t][k];
      }
    }
    total += seq.length();
  }
  std::vector<double> global_mean(n);
  for (int k = 0; k < n; ++k) global_mean[k] = global_sum[k] / total;

  for (int b = 0; b < m; ++b) {
    if (by_class[b][0].empty()) {
      std::fprintf(stderr,
                   "warning: behaviour %s has no training ticks; its "
                   "thresholds fall back to feature means\n",
                   to_string(data.label_set.at(b)).c_str());
    }
  }

  ThresholdBank bank(m, n);
  for (int b = 0; b < m; ++b) {
    for (int b2 = 0; b2 < m; ++b2) {
      if (b2 == b) continue;
      for (int k = 0; k < n; ++k) {
        const auto& va = by_class[b][k];
        const auto& vb = by_class[b2][k];
        if (va.empty() || vb.empty() ||
            overlap_coefficient(va, vb) > overlap_cutoff) {
          bank.set(b, b2, k, global_mean[k], false);
        } else {
          bank.set(b, b2, k, 0.5 * (median(va) + median(vb)), true);
        }
      }
    }
  }
  return bank;
}

void CrfModel::validate() const {
  const int m = label_set.size();
  const int n = bank.features();
  if (bank.labels() != m) throw DataError("CrfModel: bank/label set mismatch");
  const size_t expected = 2 * static_cast<size_t>(m) * (m - 1) * n + 1;
  if (weights.size() != expected) {
    throw DataError("CrfModel: weight vector has " +
                    std::to_string(weights.size()) + " entries, expected " +
                    std::to_string(expected));
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw DataError("CrfModel: non-finite weight");
  }
  if (!(sigma2 > 0)) throw DataError("CrfModel: sigma2 must be positive");
}

std::vector<int> feature_vector(std::span<const double> obs_t, int b,
                                const CrfModel& model) {
  const int m = model.label_set.size();
  const int n = model.bank.features();
  if (static_cast<int>(obs_t.size()) != n) {
    throw DataError("feature_vector: observation width mismatch");
  }
  std::vector<int> active;
  active.reserve((m - 1) * n);
  for (int b2 = 0; b2 < m; ++b2) {
    if (b2 == b) continue;
    for (int k = 0; k < n; ++k) {
      bool exceed = obs_t[k] > model.bank.threshold(b, b2, k);
      active.push_back(model.weight_index(b, b2, k, exceed));
    }
  }
  return active;
}

namespace {

// T x m matrix of per-tick label scores under the given weights.
std::vector<std::vector<double>> node_scores(std::span<const double> weights,
                                             const CrfModel& model,
                                             const FeatureSequence& seq) {
  const int m = model.label_set.size();
  const int n = model.bank.features();
  const int T = seq.length();
  std::vector<std::vector<double>> ns(T, std::vector<double>(m, 0));
  for (int t = 0; t < T; ++t) {
    const auto& row = seq.values[t];
    for (int b = 0; b < m; ++b) {
      double score = 0;
      for (int b2 = 0; b2 < m; ++b2) {
        if (b2 == b) continue;
        for (int k = 0; k < n; ++k) {
          bool exceed = row[k] > model.bank.threshold(b, b2, k);
          score += weights[model.weight_index(b, b2, k, exceed)];
        }
      }
      ns[t][b] = score;
    }
  }
  return ns;
}

}  // namespace

NllResult nll_and_gradient(std::span<const double> weights,
                           const CrfModel& model, const Dataset& data) {
  const int m = model.label_set.size();
  const int n = model.bank.features();
  const double nu = weights.back();
  const int nu_idx = static_cast<int>(weights.size()) - 1;

  NllResult result;
  result.gradient.assign(weights.size(), 0.0);

  for (const auto& seq : data.sequences) {
    if (!seq.labels) throw DataError("nll_and_gradient: unlabeled sequence");
    const int T = seq.length();
    auto ns = node_scores(weights, model, seq);

    std::vector<int> y(T);
    for (int t = 0; t < T; ++t) {
      y[t] = data.label_set.index_of((*seq.labels)[t]);
    }

    // Forward/backward in log space.
    std::vector<std::vector<double>> la(T, std::vector<double>(m));
    std::vector<std::vector<double>> lb(T, std::vector<double>(m));
    std::vector<double> tmp(m);
    for (int b = 0; b < m; ++b) la[0][b] = ns[0][b];
    for (int t = 1; t < T; ++t) {
      for (int b = 0; b < m; ++b) {
        for (int b0 = 0; b0 < m; ++b0) {
          tmp[b0] = la[t - 1][b0] + (b0 == b ? nu : 0.0);
        }
        la[t][b] = logsumexp(tmp) + ns[t][b];
      }
    }
    for (int b = 0; b < m; ++b) lb[T - 1][b] = 0;
    for (int t = T - 2; t >= 0; --t) {
      for (int b = 0; b < m; ++b) {
        for (int b1 = 0; b1 < m; ++b1) {
          tmp[b1] = (b1 == b ? nu : 0.0) + ns[t + 1][b1] + lb[t + 1][b1];
        }
        lb[t][b] = logsumexp(tmp);
      }
    }
    double log_z = logsumexp(la[T - 1]);

    // Objective: logZ minus the labeled path's score.
    double path = 0;
    for (int t = 0; t < T; ++t) {
      path += ns[t][y[t]];
      if (t > 0 && y[t - 1] == y[t]) path += nu;
    }
    result.value += log_z - path;

    // Node terms: expected minus empirical indicator counts.
    for (int t = 0; t < T; ++t) {
      const auto& row = seq.values[t];
      for (int b = 0; b < m; ++b) {
        double coef = std::exp(la[t][b] + lb[t][b] - log_z) -
                      (y[t] == b ? 1.0 : 0.0);
        if (coef == 0) continue;
        for (int b2 = 0; b2 < m; ++b2) {
          if (b2 == b) continue;
          for (int k = 0; k < n; ++k) {
            bool exceed = row[k] > model.bank.threshold(b, b2, k);
            result.gradient[model.weight_index(b, b2, k, exceed)] += coef;
          }
        }
      }
    }

    // Transition term: expected vs empirical count of equal-label steps.
    for (int t = 1; t < T; ++t) {
      double expected = 0;
      for (int b = 0; b < m; ++b) {
        expected +=
            std::exp(la[t - 1][b] + nu + ns[t][b] + lb[t][b] - log_z);
      }
      result.gradient[nu_idx] += expected - (y[t - 1] == y[t] ? 1.0 : 0.0);
    }
  }

  // Shrinkage prior on the full stacked weight vector.
  double penalty = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    penalty += weights[i] * weights[i];
    result.gradient[i] += weights[i] / model.sigma2;
  }
  result.value += penalty / (2 * model.sigma2);
  return result;
}

namespace {

struct LineSearchResult {
  bool ok = false;
  double step = 0;
  NllResult at_step;
};

// Strong-Wolfe line search (bracket + zoom).
LineSearchResult wolfe_search(
    const std::function<NllResult(const std::vector<double>&)>& eval,
    const std::vector<double>& w, const std::vector<double>& d, double f0,
    double g0d) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.4;
  auto point = [&](double a) {
    std::vector<double> wa(w.size());
    for (size_t i = 0; i < w.size(); ++i) wa[i] = w[i] + a * d[i];
    return eval(wa);
  };
  auto dirderiv = [&](const NllResult& r) {
    double g = 0;
    for (size_t i = 0; i < d.size(); ++i) g += r.gradient[i] * d[i];
    return g;
  };

  auto zoom = [&](double lo, double f_lo, double hi) -> LineSearchResult {
    for (int i = 0; i < 40; ++i) {
      double a = 0.5 * (lo + hi);
      NllResult r = point(a);
      double gd = dirderiv(r);
      if (r.value > f0 + c1 * a * g0d || r.value >= f_lo) {
        hi = a;
      } else {
        if (std::abs(gd) <= -c2 * g0d) return {true, a, std::move(r)};
        if (gd * (hi - lo) >= 0) hi = lo;
        lo = a;
        f_lo = r.value;
      }
      if (std::abs(hi - lo) < 1e-16) return {true, a, std::move(r)};
    }
    return {};
  };

  double a_prev = 0, f_prev = f0;
  double a = 1.0;
  for (int i = 0; i < 20; ++i) {
    NllResult r = point(a);
    double gd = dirderiv(r);
    if (r.value > f0 + c1 * a * g0d || (i > 0 && r.value >= f_prev)) {
      return zoom(a_prev, f_prev, a);
    }
    if (std::abs(gd) <= -c2 * g0d) return {true, a, std::move(r)};
    if (gd >= 0) return zoom(a, r.value, a_prev);
    a_prev = a;
    f_prev = r.value;
    a *= 2;
  }
  return {};
}

}  // namespace

CrfModel train_crf(const Dataset& data, const CrfTrainConfig& config,
                   std::vector<CrfTraceRow>* trace) {
  if (data.sequences.empty()) throw DataError("train_crf: no training data");
  CrfModel model;
  model.label_set = data.label_set;
  model.bank = fit_thresholds(data, config.overlap_cutoff);
  model.sigma2 = config.sigma2;
  const int m = model.label_set.size();
  const int n = model.bank.features();
  model.weights.assign(2 * static_cast<size_t>(m) * (m - 1) * n + 1, 0.0);

  auto eval = [&](const std::vector<double>& w) {
    return nll_and_gradient(w, model, data);
  };

  std::vector<double>& w = model.weights;
  NllResult cur = eval(w);
  std::vector<double> prev_grad;
  std::vector<double> dir;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    double gnorm = std::sqrt(std::inner_product(
        cur.gradient.begin(), cur.gradient.end(), cur.gradient.begin(), 0.0));
    if (trace) trace->push_back({iter, cur.value, gnorm});
    if (gnorm < config.grad_tol) break;

    // Polak-Ribiere direction with restarts on loss of descent.
    if (dir.empty()) {
      dir.resize(w.size());
      for (size_t i = 0; i < w.size(); ++i) dir[i] = -cur.gradient[i];
    } else {
      double num = 0, den = 0;
      for (size_t i = 0; i < w.size(); ++i) {
        num += cur.gradient[i] * (cur.gradient[i] - prev_grad[i]);
        den += prev_grad[i] * prev_grad[i];
      }
      double beta = std::max(0.0, num / den);
      for (size_t i = 0; i < w.size(); ++i) {
        dir[i] = -cur.gradient[i] + beta * dir[i];
      }
    }
    double g0d = std::inner_product(cur.gradient.begin(), cur.gradient.end(),
                                    dir.begin(), 0.0);
    if (g0d >= 0) {  // not a descent direction; restart
      for (size_t i = 0; i < w.size(); ++i) dir[i] = -cur.gradient[i];
      g0d = -std::inner_product(cur.gradient.begin(), cur.gradient.end(),
                                cur.gradient.begin(), 0.0);
    }

    LineSearchResult ls = wolfe_search(eval, w, dir, cur.value, g0d);
    if (!ls.ok) {
      std::fprintf(stderr,
                   "warning: line search failed at iteration %d; falling back "
                   "to steepest descent\n",
                   iter);
      double a = 1.0;
      bool improved = false;
      for (int h = 0; h < 50; ++h) {
        std::vector<double> wa(w.size());
        for (size_t i = 0; i < w.size(); ++i) {
          wa[i] = w[i] - a * cur.gradient[i];
        }
        NllResult r = eval(wa);
        if (r.value < cur.value) {
          w = std::move(wa);
          prev_grad = cur.gradient;
          cur = std::move(r);
          dir.clear();
          improved = true;
          break;
        }
        a *= 0.5;
      }
      if (!improved) break;
      continue;
    }

    for (size_t i = 0; i < w.size(); ++i) w[i] += ls.step * dir[i];
    prev_grad = std::move(cur.gradient);
    cur = std::move(ls.at_step);
  }

  model.validate();
  return model;
}

std::vector<Behaviour> viterbi_decode(const CrfModel& model,
                                      const FeatureSequence& obs) {
  model.validate();
  const int m = model.label_set.size();
  const int T = obs.length();
  if (T == 0) return {};
  const double nu = model.nu();
  auto ns = node_scores(model.weights, model, obs);

  std::vector<std::vector<double>> score(T, std::vector<double>(m));
  std::vector<std::vector<int>> back(T, std::vector<int>(m, 0));
  for (int b = 0; b < m; ++b) score[0][b] = ns[0][b];
  for (int t = 1; t < T; ++t) {
    for (int b = 0; b < m; ++b) {
      int best = 0;
      double best_val = score[t - 1][0] + (b == 0 ? nu : 0.0);
      for (int b0 = 1; b0 < m; ++b0) {
        double v = score[t - 1][b0] + (b0 == b ? nu : 0.0);
        if (v > best_val) {  // strict: ties keep the earlier predecessor
          best_val = v;
          best = b0;
        }
      }
      score[t][b] = best_val + ns[t][b];
      back[t][b] = best;
    }
  }
  int b = 0;
  for (int c = 1; c < m; ++c) {
    if (score[T - 1][c] > score[T - 1][b]) b = c;
  }
  std::vector<int> path(T);
  path[T - 1] = b;
  for (int t = T - 1; t > 0; --t) path[t - 1] = back[t][path[t]];

  std::vector<Behaviour> out(T);
  for (int t = 0; t < T; ++t) out[t] = model.label_set.at(path[t]);
  return out;
}

double sequence_score(const CrfModel& model, const FeatureSequence& obs,
                      std::span<const int> labels) {
  auto ns = node_scores(model.weights, model, obs);
  double score = 0;
  for (int t = 0; t < obs.length(); ++t) {
    score += ns[t][labels[t]];
    if (t > 0 && labels[t - 1] == labels[t]) score += model.nu();
  }
  return score;
}

}  // namespace walker
