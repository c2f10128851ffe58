#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emball/types.h"

namespace emball {

enum class SimilarityKind { kDot, kCosine };
enum class LossKind { kMarginRanking, kSoftmaxNll };

enum class Side { kLhs, kRhs };

// One SGD step's payload: lhs bag a, positive rhs bag b, k negative rhs bags.
struct TrainingInstance {
  FeatureBag lhs;
  FeatureBag rhs_pos;
  std::vector<FeatureBag> rhs_negs;

  void clear() {
    lhs.clear();
    rhs_pos.clear();
    rhs_negs.clear();
  }
};

// Embedding parameters: a D x d matrix (and optionally a second one for
// rhs entities), per-row Adagrad accumulators, and the hyperparameters the
// math kernel needs. Parameters are stored as 32-bit floats; all arithmetic
// runs in double.
//
// Trainer threads may read-modify-write rows concurrently without locks
// (hogwild): updates race and interleave, correctness is statistical.
// Single-threaded use is deterministic.
class EmbeddingModel {
 public:
  EmbeddingModel(std::uint64_t rows, std::uint32_t dim, bool share_embeddings,
                 double max_norm, double norm_pow = 0.0);

  // Fills both matrices with U[-1/d, 1/d] draws from a seeded generator.
  void init_uniform(std::uint64_t seed);

  std::span<float> row(Side side, FeatureId id);
  std::span<const float> row(Side side, FeatureId id) const;

  float& accumulator(Side side, FeatureId id);
  float accumulator(Side side, FeatureId id) const;

  std::uint64_t rows() const { return rows_; }
  std::uint32_t dim() const { return dim_; }
  bool share_embeddings() const { return share_; }
  // Radius r of the max-norm ball; <= 0 means unbounded.
  double max_norm() const { return max_norm_; }
  // Entity sums are divided by |bag|^norm_pow; 0 leaves the plain sum.
  double norm_pow() const { return norm_pow_; }

  std::vector<float>& matrix_data(Side side);
  const std::vector<float>& matrix_data(Side side) const;

 private:
  std::uint64_t rows_;
  std::uint32_t dim_;
  bool share_;
  double max_norm_;
  double norm_pow_;
  std::vector<float> lhs_;
  std::vector<float> rhs_;  // empty when shared
  std::vector<float> lhs_acc_;
  std::vector<float> rhs_acc_;  // empty when shared
};

// Sum of the selected matrix's rows for the given ids (duplicates
// accumulate), scaled by 1/|bag|^norm_pow. Empty bag -> zero vector.
std::vector<double> embed_entity(const FeatureBag& features, Side side,
                                 const EmbeddingModel& model);
void embed_entity(const FeatureBag& features, Side side,
                  const EmbeddingModel& model, std::vector<double>& out);

// dot -> <a,b>; cosine -> <a,b>/(|a||b|), 0 when either norm is 0.
double similarity(std::span<const double> a, std::span<const double> b,
                  SimilarityKind kind);

// sum_i max(0, margin - pos_sim + neg_sim_i)
double margin_loss(double pos_sim, std::span<const double> neg_sims,
                   double margin);

// -log( exp(pos) / (exp(pos) + sum_i exp(neg_i)) ), max-shifted.
double softmax_loss(double pos_sim, std::span<const double> neg_sims);

// Analytic per-instance gradients, sparse over the participating rows.
// Entries are sorted by id with duplicates merged; a row appearing on both
// sides shows up once per side. When the loss sits in a flat region (all
// hinge terms inactive) both sides are empty.
struct SparseGradients {
  struct Entry {
    FeatureId id;
    std::vector<double> grad;
  };

  double loss = 0.0;
  std::vector<Entry> lhs;
  std::vector<Entry> rhs;

  bool empty() const { return lhs.empty() && rhs.empty(); }
};

// Scratch space reused across steps by a single trainer thread.
struct StepWorkspace {
  std::vector<double> lhs_vec;
  std::vector<double> rhs_vec;
  std::vector<std::vector<double>> neg_vecs;
  std::vector<double> neg_sims;
  std::vector<double> dloss_dneg;
  std::vector<double> dvec;
  SparseGradients grads;
};

const SparseGradients& step_gradients(const TrainingInstance& instance,
                                      const EmbeddingModel& model,
                                      SimilarityKind sim, LossKind loss,
                                      double margin, StepWorkspace& ws);
SparseGradients step_gradients(const TrainingInstance& instance,
                               const EmbeddingModel& model,
                               SimilarityKind sim, LossKind loss,
                               double margin);

// Per touched row i: acc_i += |g_i|^2 / d, then
// row_i -= (base_lr / sqrt(acc_i + 1e-6)) * g_i, then max-norm projection.
// lhs entries apply before rhs entries.
void adagrad_apply(EmbeddingModel& model, const SparseGradients& grads,
                   double base_lr);

// Rescales the row onto the ball of radius r if its L2 norm exceeds r.
std::vector<double> project_max_norm(std::vector<double> row, double r);
void project_max_norm_inplace(std::span<float> row, double r);

}  // namespace emball
