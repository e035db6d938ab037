#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gcsntk/condensed.hpp"
#include "gcsntk/grad.hpp"
#include "gcsntk/graph.hpp"
#include "gcsntk/kernel.hpp"

namespace gcsntk {

enum class InitStrategy { Sample, Noise };

struct CondenseConfig {
  int nodes_per_class = 0;  // per-class budget; 0 means use total_nodes
  int total_nodes = 0;      // M; 0 means use nodes_per_class
  int epochs = 200;
  double learning_rate = 0.01;
  double lambda = 1.0;
  KernelConfig kernel;
  Variant variant = Variant::X;
  std::uint64_t seed = 0;
  int eval_every = 10;
  InitStrategy init = InitStrategy::Sample;
  LossRows loss_rows = LossRows::Train;
  bool stop_grad_coeffs = false;

  void validate() const;

  /// Per-class budgets for a target with the given per-class training-node
  /// counts. A total budget is split evenly with the remainder allotted
  /// round-robin by descending class size (ties toward the lower index).
  std::vector<int> class_budgets(const std::vector<int>& train_class_counts) const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> val_accuracy;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

struct CondenseResult {
  CondensedGraph graph;
  TrainHistory history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

/// Thrown when the loss turns non-finite mid-training; carries the last
/// finite checkpoint.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, CondensedGraph checkpoint,
                  TrainHistory history)
      : Error(msg), checkpoint(std::move(checkpoint)), history(std::move(history)) {}
  CondensedGraph checkpoint;
  TrainHistory history;
};

/// Random initialization of the condensed graph. "Sample" draws class-
/// balanced training rows without replacement; "Noise" draws standard
/// normal entries scaled by 0.01. Labels are fixed one-hot and class-
/// balanced. Under XA the adjacency parameter starts at zero (logistic
/// squashing gives 0.5 off-diagonal weights, ones on the diagonal).
CondensedGraph init_condensed(const Graph& target, const CondenseConfig& config);

/// Identity for variant X; logistic(adj_param) symmetrized with the
/// diagonal forced to 1 for variant XA. The result is the self-looped
/// weighted adjacency used in kernel aggregation.
Matrix materialize_adjacency(const CondensedGraph& condensed, Variant variant);

/// Fits ridge regression on the condensed graph and scores accuracy on the
/// target's test split. The variant is inferred from adj_param presence.
double evaluate(const CondensedGraph& condensed, const Graph& target,
                const KernelConfig& kernel, double lambda);

/// Accuracy on an arbitrary split ("train" | "val" | "test").
double evaluate_split(const CondensedGraph& condensed, const Graph& target,
                      const KernelConfig& kernel, double lambda,
                      const std::vector<Index>& rows);

/// The full condensation loop: per epoch computes kernels, loss and
/// gradients, applies one Adam step (beta1 0.9, beta2 0.999, eps 1e-8),
/// and every eval_every epochs (plus the final epoch) scores validation
/// accuracy. Returns the checkpoint with the best validation accuracy,
/// ties resolved toward the earlier epoch.
CondenseResult condense(const Graph& target, const CondenseConfig& config);

}  // namespace gcsntk
