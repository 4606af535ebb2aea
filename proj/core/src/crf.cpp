#include "acosqe/crf.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "acosqe/errors.hpp"

namespace acosqe {

namespace {

std::shared_ptr<TensorNode> make_node(std::vector<int> shape) {
  auto n = std::make_shared<TensorNode>();
  int64_t count = 1;
  for (int d : shape) count *= d;
  n->shape = std::move(shape);
  n->val = std::make_shared<std::vector<double>>(static_cast<size_t>(count), 0.0);
  return n;
}

Tensor finish(std::shared_ptr<TensorNode> n, std::vector<Tensor> parents,
              std::function<void()> backprop) {
  bool req = false;
  for (const auto& p : parents)
    if (p.requires_grad()) req = true;
  n->requires_grad = req;
  if (req) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

void validate_inputs(const Tensor& em, const Tensor& tr) {
  if (em.shape().size() != 2) throw ShapeMismatchError("crf: emissions must be n x L");
  int n = em.rows(), labels = em.cols();
  if (n < 1) throw EmptySequenceError("crf: empty emission sequence");
  if (tr.shape().size() != 2 || tr.rows() != labels + 2 || tr.cols() != labels + 2)
    throw ShapeMismatchError("crf: transitions must be (L+2) x (L+2)");
}

double logsumexp_raw(const double* x, int n) {
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  if (!std::isfinite(mx)) return mx;  // all -inf stays -inf
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

}  // namespace

Tensor crf_score(const Tensor& emissions, const Tensor& transitions,
                 const std::vector<int>& tags) {
  validate_inputs(emissions, transitions);
  int n = emissions.rows(), labels = emissions.cols();
  if (static_cast<int>(tags.size()) != n)
    throw ShapeMismatchError("crf_score: tags length must match emissions rows");
  for (int t : tags)
    if (t < 0 || t >= labels)
      throw LabelOutOfRangeError("crf_score: tag " + std::to_string(t) +
                                 " not in [0," + std::to_string(labels) + ")");
  int start = crf_start_index(labels), end = crf_end_index(labels);
  int w = labels + 2;

  double s = transitions.at(start, tags[0]);
  for (int t = 0; t < n; ++t) {
    s += emissions.at(t, tags[t]);
    if (t + 1 < n) s += transitions.at(tags[t], tags[t + 1]);
  }
  s += transitions.at(tags[n - 1], end);

  auto node = make_node({1});
  (*node->val)[0] = s;
  TensorNode* em = emissions.node();
  TensorNode* tr = transitions.node();
  TensorNode* out = node.get();
  std::vector<int> path = tags;
  return finish(std::move(node), {emissions, transitions},
                [em, tr, out, path, n, labels, start, end, w]() {
                  double g = out->grad[0];
                  if (em->requires_grad) {
                    em->ensure_grad();
                    for (int t = 0; t < n; ++t)
                      em->grad[static_cast<size_t>(t) * labels + path[t]] += g;
                  }
                  if (tr->requires_grad) {
                    tr->ensure_grad();
                    tr->grad[static_cast<size_t>(start) * w + path[0]] += g;
                    for (int t = 0; t + 1 < n; ++t)
                      tr->grad[static_cast<size_t>(path[t]) * w + path[t + 1]] += g;
                    tr->grad[static_cast<size_t>(path[n - 1]) * w + end] += g;
                  }
                });
}

Tensor crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
  validate_inputs(emissions, transitions);
  int n = emissions.rows(), labels = emissions.cols();
  int start = crf_start_index(labels), end = crf_end_index(labels);
  int w = labels + 2;
  const double* E = emissions.data();
  const double* T = transitions.data();

  // forward recursion in log space
  std::vector<double> alpha(static_cast<size_t>(n) * labels);
  for (int j = 0; j < labels; ++j)
    alpha[j] = T[static_cast<size_t>(start) * w + j] + E[j];
  std::vector<double> work(labels);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < labels; ++j) {
      for (int i = 0; i < labels; ++i)
        work[i] = alpha[static_cast<size_t>(t - 1) * labels + i] +
                  T[static_cast<size_t>(i) * w + j];
      alpha[static_cast<size_t>(t) * labels + j] =
          logsumexp_raw(work.data(), labels) + E[static_cast<size_t>(t) * labels + j];
    }
  }
  for (int j = 0; j < labels; ++j)
    work[j] = alpha[static_cast<size_t>(n - 1) * labels + j] +
              T[static_cast<size_t>(j) * w + end];
  double log_z = logsumexp_raw(work.data(), labels);
  if (!std::isfinite(log_z))
    throw NonFiniteValueError("crf_log_partition: partition is not finite");

  auto node = make_node({1});
  (*node->val)[0] = log_z;
  TensorNode* em = emissions.node();
  TensorNode* tr = transitions.node();
  TensorNode* out = node.get();
  // keep alpha for the backward sweep; beta is recomputed there
  auto alpha_keep = std::make_shared<std::vector<double>>(std::move(alpha));
  return finish(
      std::move(node), {emissions, transitions},
      [em, tr, out, alpha_keep, n, labels, start, end, w, log_z]() {
        double g = out->grad[0];
        const double* E = em->val->data();
        const double* T = tr->val->data();
        const std::vector<double>& a = *alpha_keep;

        // backward recursion: beta[t][i] = log sum over completions from t,i
        std::vector<double> beta(static_cast<size_t>(n) * labels);
        for (int i = 0; i < labels; ++i)
          beta[static_cast<size_t>(n - 1) * labels + i] =
              T[static_cast<size_t>(i) * w + end];
        std::vector<double> work(labels);
        for (int t = n - 2; t >= 0; --t) {
          for (int i = 0; i < labels; ++i) {
            for (int j = 0; j < labels; ++j)
              work[j] = T[static_cast<size_t>(i) * w + j] +
                        E[static_cast<size_t>(t + 1) * labels + j] +
                        beta[static_cast<size_t>(t + 1) * labels + j];
            beta[static_cast<size_t>(t) * labels + i] =
                logsumexp_raw(work.data(), labels);
          }
        }

        if (em->requires_grad) {
          em->ensure_grad();
          for (int t = 0; t < n; ++t)
            for (int j = 0; j < labels; ++j) {
              double gamma = std::exp(a[static_cast<size_t>(t) * labels + j] +
                                      beta[static_cast<size_t>(t) * labels + j] -
                                      log_z);
              em->grad[static_cast<size_t>(t) * labels + j] += g * gamma;
            }
        }
        if (tr->requires_grad) {
          tr->ensure_grad();
          for (int j = 0; j < labels; ++j) {
            double gamma0 = std::exp(a[j] + beta[j] - log_z);
            tr->grad[static_cast<size_t>(start) * w + j] += g * gamma0;
            double gamma_last =
                std::exp(a[static_cast<size_t>(n - 1) * labels + j] +
                         beta[static_cast<size_t>(n - 1) * labels + j] - log_z);
            tr->grad[static_cast<size_t>(j) * w + end] += g * gamma_last;
          }
          for (int t = 0; t + 1 < n; ++t)
            for (int i = 0; i < labels; ++i)
              for (int j = 0; j < labels; ++j) {
                double xi = std::exp(a[static_cast<size_t>(t) * labels + i] +
                                     T[static_cast<size_t>(i) * w + j] +
                                     E[static_cast<size_t>(t + 1) * labels + j] +
                                     beta[static_cast<size_t>(t + 1) * labels + j] -
                                     log_z);
                tr->grad[static_cast<size_t>(i) * w + j] += g * xi;
              }
        }
      });
}

Tensor crf_nll(const Tensor& emissions, const Tensor& transitions,
               const std::vector<int>& tags) {
  return sub(crf_log_partition(emissions, transitions),
             crf_score(emissions, transitions, tags));
}

std::vector<int> viterbi_decode(const Tensor& emissions, const Tensor& transitions) {
  validate_inputs(emissions, transitions);
  int n = emissions.rows(), labels = emissions.cols();
  int start = crf_start_index(labels), end = crf_end_index(labels);
  int w = labels + 2;
  const double* E = emissions.data();
  const double* T = transitions.data();

  std::vector<double> score(static_cast<size_t>(n) * labels);
  std::vector<int> back(static_cast<size_t>(n) * labels, -1);
  for (int j = 0; j < labels; ++j)
    score[j] = T[static_cast<size_t>(start) * w + j] + E[j];
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < labels; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int i = 0; i < labels; ++i) {
        double s = score[static_cast<size_t>(t - 1) * labels + i] +
                   T[static_cast<size_t>(i) * w + j];
        if (s > best) {  // strict: ties keep the lowest previous label
          best = s;
          arg = i;
        }
      }
      score[static_cast<size_t>(t) * labels + j] =
          best + E[static_cast<size_t>(t) * labels + j];
      back[static_cast<size_t>(t) * labels + j] = arg;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (int j = 0; j < labels; ++j) {
    double s = score[static_cast<size_t>(n - 1) * labels + j] +
               T[static_cast<size_t>(j) * w + end];
    if (s > best) {
      best = s;
      arg = j;
    }
  }
  std::vector<int> path(n);
  path[n - 1] = arg;
  for (int t = n - 1; t > 0; --t)
    path[t - 1] = back[static_cast<size_t>(t) * labels + path[t]];
  return path;
}

Tensor bio_constraint_matrix(int k_max) {
  int labels = 1 + 4 * k_max;
  int w = labels + 2;
  int start = crf_start_index(labels), end = crf_end_index(labels);
  const double kBan = -1e4;
  Tensor m = Tensor::zeros({w, w});
  double* M = m.mutable_data();
  auto ban = [&](int i, int j) { M[static_cast<size_t>(i) * w + j] = kBan; };
  for (int i = 0; i < w; ++i) ban(i, start);        // nothing enters START
  for (int j = 0; j < w; ++j) ban(end, j);          // nothing leaves END
  ban(start, end);
  // I-X-k is reachable only from B-X-k or I-X-k
  for (int k = 1; k <= k_max; ++k) {
    int base = 1 + 4 * (k - 1);
    for (int which = 0; which < 2; ++which) {  // 0: AC pair, 1: OT pair
      int b_tag = base + 2 * which;
      int i_tag = b_tag + 1;
      for (int from = 0; from < w; ++from)
        if (from != b_tag && from != i_tag) ban(from, i_tag);
    }
  }
  return m;
}

namespace {

void check_enumeration_size(int n, int labels) {
  double total = 1.0;
  for (int t = 0; t < n; ++t) {
    total *= labels;
    if (total > 100000.0)
      throw TooLargeError("brute force enumeration needs " + std::to_string(labels) +
                          "^" + std::to_string(n) + " paths");
  }
}

double path_score(const double* E, const double* T, const std::vector<int>& path,
                  int labels, int w) {
  int n = static_cast<int>(path.size());
  int start = labels, end = labels + 1;
  double s = T[static_cast<size_t>(start) * w + path[0]];
  for (int t = 0; t < n; ++t) {
    s += E[static_cast<size_t>(t) * labels + path[t]];
    if (t + 1 < n) s += T[static_cast<size_t>(path[t]) * w + path[t + 1]];
  }
  s += T[static_cast<size_t>(path[n - 1]) * w + end];
  return s;
}

template <typename Fn>
void for_each_path(int n, int labels, Fn&& fn) {
  std::vector<int> path(n, 0);
  while (true) {
    fn(path);
    int pos = n - 1;
    while (pos >= 0) {
      if (++path[pos] < labels) break;
      path[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
}

}  // namespace

double brute_force_log_partition(const Tensor& emissions, const Tensor& transitions) {
  validate_inputs(emissions, transitions);
  int n = emissions.rows(), labels = emissions.cols();
  check_enumeration_size(n, labels);
  int w = labels + 2;
  const double* E = emissions.data();
  const double* T = transitions.data();
  std::vector<double> scores;
  for_each_path(n, labels, [&](const std::vector<int>& p) {
    scores.push_back(path_score(E, T, p, labels, w));
  });
  return logsumexp_raw(scores.data(), static_cast<int>(scores.size()));
}

std::vector<int> brute_force_best_path(const Tensor& emissions,
                                       const Tensor& transitions) {
  validate_inputs(emissions, transitions);
  int n = emissions.rows(), labels = emissions.cols();
  check_enumeration_size(n, labels);
  int w = labels + 2;
  const double* E = emissions.data();
  const double* T = transitions.data();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> arg(n, 0);
  for_each_path(n, labels, [&](const std::vector<int>& p) {
    double s = path_score(E, T, p, labels, w);
    if (s > best) {  // strict: first (lexicographically least) max wins
      best = s;
      arg = p;
    }
  });
  return arg;
}

}  // namespace acosqe
