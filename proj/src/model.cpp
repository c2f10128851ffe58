#include "emball/model.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace emball {

EmbeddingModel::EmbeddingModel(std::uint64_t rows, std::uint32_t dim,
                               bool share_embeddings, double max_norm,
                               double norm_pow)
    : rows_(rows),
      dim_(dim),
      share_(share_embeddings),
      max_norm_(max_norm),
      norm_pow_(norm_pow) {
  if (dim_ == 0) {
    throw std::invalid_argument("dim must be >= 1");
  }
  lhs_.assign(rows_ * dim_, 0.0f);
  lhs_acc_.assign(rows_, 0.0f);
  if (!share_) {
    rhs_.assign(rows_ * dim_, 0.0f);
    rhs_acc_.assign(rows_, 0.0f);
  }
}

void EmbeddingModel::init_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const float bound = 1.0f / static_cast<float>(dim_);
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (auto& v : lhs_) v = dist(rng);
  for (auto& v : rhs_) v = dist(rng);
  std::fill(lhs_acc_.begin(), lhs_acc_.end(), 0.0f);
  std::fill(rhs_acc_.begin(), rhs_acc_.end(), 0.0f);
}

std::span<float> EmbeddingModel::row(Side side, FeatureId id) {
  if (id >= rows_) {
    throw std::out_of_range("feature id out of range");
  }
  auto& data = (side == Side::kRhs && !share_) ? rhs_ : lhs_;
  return {data.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

std::span<const float> EmbeddingModel::row(Side side, FeatureId id) const {
  if (id >= rows_) {
    throw std::out_of_range("feature id out of range");
  }
  const auto& data = (side == Side::kRhs && !share_) ? rhs_ : lhs_;
  return {data.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

float& EmbeddingModel::accumulator(Side side, FeatureId id) {
  auto& acc = (side == Side::kRhs && !share_) ? rhs_acc_ : lhs_acc_;
  return acc.at(id);
}

float EmbeddingModel::accumulator(Side side, FeatureId id) const {
  const auto& acc = (side == Side::kRhs && !share_) ? rhs_acc_ : lhs_acc_;
  return acc.at(id);
}

std::vector<float>& EmbeddingModel::matrix_data(Side side) {
  return (side == Side::kRhs && !share_) ? rhs_ : lhs_;
}

const std::vector<float>& EmbeddingModel::matrix_data(Side side) const {
  return (side == Side::kRhs && !share_) ? rhs_ : lhs_;
}

void embed_entity(const FeatureBag& features, Side side,
                  const EmbeddingModel& model, std::vector<double>& out) {
  out.assign(model.dim(), 0.0);
  for (FeatureId id : features) {
    auto r = model.row(side, id);
    for (std::uint32_t j = 0; j < model.dim(); ++j) {
      out[j] += r[j];
    }
  }
  if (model.norm_pow() > 0.0 && !features.empty()) {
    const double scale =
        std::pow(static_cast<double>(features.size()), -model.norm_pow());
    for (auto& v : out) v *= scale;
  }
}

std::vector<double> embed_entity(const FeatureBag& features, Side side,
                                 const EmbeddingModel& model) {
  std::vector<double> out;
  embed_entity(features, side, model, out);
  return out;
}

double similarity(std::span<const double> a, std::span<const double> b,
                  SimilarityKind kind) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("similarity: dimension mismatch");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  if (kind == SimilarityKind::kDot) return dot;

  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double margin_loss(double pos_sim, std::span<const double> neg_sims,
                   double margin) {
  double loss = 0.0;
  for (double neg : neg_sims) {
    loss += std::max(0.0, margin - pos_sim + neg);
  }
  return loss;
}

double softmax_loss(double pos_sim, std::span<const double> neg_sims) {
  double shift = pos_sim;
  for (double neg : neg_sims) shift = std::max(shift, neg);
  double z = std::exp(pos_sim - shift);
  for (double neg : neg_sims) z += std::exp(neg - shift);
  return shift - pos_sim + std::log(z);
}

std::vector<double> project_max_norm(std::vector<double> row, double r) {
  if (r <= 0.0) {
    throw std::invalid_argument("max-norm radius must be positive");
  }
  double sq = 0.0;
  for (double v : row) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > r) {
    const double scale = r / norm;
    for (auto& v : row) v *= scale;
  }
  return row;
}

void project_max_norm_inplace(std::span<float> row, double r) {
  double sq = 0.0;
  for (float v : row) sq += static_cast<double>(v) * v;
  const double norm = std::sqrt(sq);
  if (norm > r) {
    const double scale = r / norm;
    for (auto& v : row) v = static_cast<float>(v * scale);
  }
}

namespace {

// Appends touched rows into a reusable entry list, merging duplicates.
class SideAccumulator {
 public:
  SideAccumulator(std::vector<SparseGradients::Entry>& entries,
                  std::uint32_t dim)
      : entries_(entries), dim_(dim) {}

  void add(const FeatureBag& bag, std::span<const double> dvec, double scale) {
    for (FeatureId id : bag) {
      auto& grad = at(id);
      for (std::uint32_t j = 0; j < dim_; ++j) {
        grad[j] += scale * dvec[j];
      }
    }
  }

  void finish() {
    entries_.resize(used_);
    std::sort(entries_.begin(), entries_.end(),
              [](const SparseGradients::Entry& a,
                 const SparseGradients::Entry& b) { return a.id < b.id; });
  }

 private:
  std::vector<double>& at(FeatureId id) {
    for (std::size_t i = 0; i < used_; ++i) {
      if (entries_[i].id == id) return entries_[i].grad;
    }
    if (used_ == entries_.size()) {
      entries_.push_back({id, std::vector<double>(dim_, 0.0)});
    } else {
      entries_[used_].id = id;
      entries_[used_].grad.assign(dim_, 0.0);
    }
    return entries_[used_++].grad;
  }

  std::vector<SparseGradients::Entry>& entries_;
  std::uint32_t dim_;
  std::size_t used_ = 0;
};

double bag_scale(const FeatureBag& bag, double norm_pow) {
  if (norm_pow <= 0.0 || bag.empty()) return 1.0;
  return std::pow(static_cast<double>(bag.size()), -norm_pow);
}

// dvec += coeff * dS/da for S = sim(a, b).
void add_sim_grad_wrt_a(std::vector<double>& dvec, double coeff,
                        std::span<const double> a, std::span<const double> b,
                        SimilarityKind kind) {
  const std::size_t d = a.size();
  if (kind == SimilarityKind::kDot) {
    for (std::size_t j = 0; j < d; ++j) dvec[j] += coeff * b[j];
    return;
  }
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    dot += a[j] * b[j];
    na2 += a[j] * a[j];
    nb2 += b[j] * b[j];
  }
  if (na2 == 0.0 || nb2 == 0.0) return;  // sim pinned to 0, no gradient
  const double inv = 1.0 / (std::sqrt(na2) * std::sqrt(nb2));
  const double s = dot * inv;
  for (std::size_t j = 0; j < d; ++j) {
    dvec[j] += coeff * (b[j] * inv - s * a[j] / na2);
  }
}

// dvec += coeff * dS/db; sim is symmetric in its arguments.
void add_sim_grad_wrt_b(std::vector<double>& dvec, double coeff,
                        std::span<const double> a, std::span<const double> b,
                        SimilarityKind kind) {
  add_sim_grad_wrt_a(dvec, coeff, b, a, kind);
}

}  // namespace

const SparseGradients& step_gradients(const TrainingInstance& instance,
                                      const EmbeddingModel& model,
                                      SimilarityKind sim, LossKind loss,
                                      double margin, StepWorkspace& ws) {
  const std::uint32_t d = model.dim();
  const std::size_t k = instance.rhs_negs.size();

  embed_entity(instance.lhs, Side::kLhs, model, ws.lhs_vec);
  embed_entity(instance.rhs_pos, Side::kRhs, model, ws.rhs_vec);
  const double pos_sim = similarity(ws.lhs_vec, ws.rhs_vec, sim);

  if (ws.neg_vecs.size() < k) ws.neg_vecs.resize(k);
  ws.neg_sims.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    embed_entity(instance.rhs_negs[i], Side::kRhs, model, ws.neg_vecs[i]);
    ws.neg_sims[i] = similarity(ws.lhs_vec, ws.neg_vecs[i], sim);
  }

  // Loss and its derivative w.r.t. each similarity.
  double dloss_dpos = 0.0;
  ws.dloss_dneg.assign(k, 0.0);
  if (loss == LossKind::kMarginRanking) {
    double total = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double t = margin - pos_sim + ws.neg_sims[i];
      if (t > 0.0) {
        total += t;
        ws.dloss_dneg[i] = 1.0;
        active++;
      }
    }
    ws.grads.loss = total;
    dloss_dpos = -static_cast<double>(active);
    if (active == 0) {  // flat region: no participating rows
      ws.grads.lhs.clear();
      ws.grads.rhs.clear();
      return ws.grads;
    }
  } else {
    double shift = pos_sim;
    for (double neg : ws.neg_sims) shift = std::max(shift, neg);
    double z = std::exp(pos_sim - shift);
    for (double neg : ws.neg_sims) z += std::exp(neg - shift);
    ws.grads.loss = shift - pos_sim + std::log(z);
    const double p_pos = std::exp(pos_sim - shift) / z;
    dloss_dpos = p_pos - 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      ws.dloss_dneg[i] = std::exp(ws.neg_sims[i] - shift) / z;
    }
  }

  SideAccumulator lhs_acc(ws.grads.lhs, d);
  SideAccumulator rhs_acc(ws.grads.rhs, d);
  const double norm_pow = model.norm_pow();

  // dL/da, chained through every similarity the lhs vector enters.
  ws.dvec.assign(d, 0.0);
  add_sim_grad_wrt_a(ws.dvec, dloss_dpos, ws.lhs_vec, ws.rhs_vec, sim);
  for (std::size_t i = 0; i < k; ++i) {
    if (ws.dloss_dneg[i] != 0.0) {
      add_sim_grad_wrt_a(ws.dvec, ws.dloss_dneg[i], ws.lhs_vec, ws.neg_vecs[i],
                         sim);
    }
  }
  lhs_acc.add(instance.lhs, ws.dvec, bag_scale(instance.lhs, norm_pow));

  // dL/db for the positive bag.
  ws.dvec.assign(d, 0.0);
  add_sim_grad_wrt_b(ws.dvec, dloss_dpos, ws.lhs_vec, ws.rhs_vec, sim);
  rhs_acc.add(instance.rhs_pos, ws.dvec, bag_scale(instance.rhs_pos, norm_pow));

  // dL/db- per active negative bag.
  for (std::size_t i = 0; i < k; ++i) {
    if (ws.dloss_dneg[i] == 0.0) continue;
    ws.dvec.assign(d, 0.0);
    add_sim_grad_wrt_b(ws.dvec, ws.dloss_dneg[i], ws.lhs_vec, ws.neg_vecs[i],
                       sim);
    rhs_acc.add(instance.rhs_negs[i], ws.dvec,
                bag_scale(instance.rhs_negs[i], norm_pow));
  }

  lhs_acc.finish();
  rhs_acc.finish();
  return ws.grads;
}

SparseGradients step_gradients(const TrainingInstance& instance,
                               const EmbeddingModel& model, SimilarityKind sim,
                               LossKind loss, double margin) {
  StepWorkspace ws;
  step_gradients(instance, model, sim, loss, margin, ws);
  return std::move(ws.grads);
}

void adagrad_apply(EmbeddingModel& model, const SparseGradients& grads,
                   double base_lr) {
  if (base_lr <= 0.0) {
    throw std::invalid_argument("learning rate must be positive");
  }
  constexpr double kEps = 1e-6;
  const std::uint32_t d = model.dim();
  const double r = model.max_norm();

  auto apply_side = [&](Side side,
                        const std::vector<SparseGradients::Entry>& entries) {
    for (const auto& e : entries) {
      double gsq = 0.0;
      for (std::uint32_t j = 0; j < d; ++j) gsq += e.grad[j] * e.grad[j];
      gsq /= d;

      float& acc = model.accumulator(side, e.id);
      const double updated = static_cast<double>(acc) + gsq;
      acc = static_cast<float>(updated);

      const double step = base_lr / std::sqrt(updated + kEps);
      auto row = model.row(side, e.id);
      for (std::uint32_t j = 0; j < d; ++j) {
        row[j] = static_cast<float>(row[j] - step * e.grad[j]);
      }
      if (r > 0.0) {
        project_max_norm_inplace(row, r);
      }
    }
  };

  apply_side(Side::kLhs, grads.lhs);
  apply_side(Side::kRhs, grads.rhs);
}

}  // namespace emball
