#include "gatlab/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>

namespace gatlab::trainer {

namespace {

std::uint64_t fnv1a(const std::vector<Matrix>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Matrix& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.data());
    const std::size_t len = static_cast<std::size_t>(p.size()) * sizeof(double);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

struct AdamState {
  std::vector<Matrix> m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  explicit AdamState(const std::vector<Matrix>& params) {
    for (const Matrix& p : params) {
      m.push_back(Matrix::Zero(p.rows(), p.cols()));
      v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }

  void update(std::vector<Matrix>& params, const std::vector<Matrix>& grads, double lr) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
      const Matrix mhat = m[i] / bc1;
      const Matrix vhat = v[i] / bc2;
      params[i] -= lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Matrix::Constant(vhat.rows(), vhat.cols(), eps));
    }
  }
};

}  // namespace

int select_best_epoch(const std::vector<metrics::EpochTrace>& traces) {
  if (traces.empty()) throw TrainError("no epochs recorded");
  int best = 0;
  for (std::size_t e = 1; e < traces.size(); ++e)
    if (traces[e].acc_val > traces[static_cast<std::size_t>(best)].acc_val)
      best = static_cast<int>(e);
  return best;
}

TrainResult train(model::Model& m, const Dataset& dataset, const HParams& hp) {
  if (hp.learning_rate < 0.0) throw TrainError("learning rate must be >= 0");
  if (hp.epochs < 1) throw TrainError("epochs must be >= 1");
  m.config.dropout = hp.dropout;

  TrainResult result;
  AdamState adam(m.params);
  double best_val = -1.0;
  int since_improve = 0;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    ad::Tape tape;
    const std::uint64_t drop_seed =
        hp.seed * 0x2545f4914f6cdd1dULL + static_cast<std::uint64_t>(epoch) + 1;
    const auto fwd = model::forward_on_tape(tape, m, dataset.features, true, drop_seed);
    ad::Var loss = tape.masked_cross_entropy(fwd.logits, dataset.labels, dataset.train_mask);
    if (hp.weight_decay != 0.0)
      for (ad::Var p : fwd.param_vars)
        loss = tape.add(loss, tape.scale(tape.sum_squares(p), 0.5 * hp.weight_decay));

    const double loss_value = tape.value(loss)(0, 0);
    if (!std::isfinite(loss_value))
      throw TrainError("training diverged at epoch " + std::to_string(epoch) +
                       " (loss is not finite)");

    const Matrix train_logits = tape.value(fwd.logits);
    tape.backward(loss);
    std::vector<Matrix> grads;
    grads.reserve(m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      try {
        grads.push_back(tape.grad(fwd.param_vars[i]));
      } catch (const ad::TapeError&) {
        grads.push_back(Matrix::Zero(m.params[i].rows(), m.params[i].cols()));
      }
    }

    const Matrix logits =
        hp.dropout > 0.0 ? model::forward(m, dataset, false, 0) : train_logits;

    metrics::EpochTrace tr;
    tr.epoch = epoch;
    tr.loss = loss_value;
    tr.acc_train = metrics::accuracy(logits, dataset.labels, dataset.train_mask);
    tr.acc_val = metrics::accuracy(logits, dataset.labels, dataset.val_mask);
    tr.acc_test = metrics::accuracy(logits, dataset.labels, dataset.test_mask);
    tr.smv = metrics::smv(logits);
    tr.corr = metrics::corr(logits);
    tr.grad_l1_mean = metrics::grad_first_layer_mean_abs(grads, m);
    result.traces.push_back(tr);

    adam.update(m.params, grads, hp.learning_rate);

    if (tr.acc_val > best_val) {
      best_val = tr.acc_val;
      since_improve = 0;
    } else if (++since_improve >= hp.patience) {
      break;
    }
  }

  result.best_epoch = select_best_epoch(result.traces);
  result.val_at_best = result.traces[static_cast<std::size_t>(result.best_epoch)].acc_val;
  result.test_at_best = result.traces[static_cast<std::size_t>(result.best_epoch)].acc_test;
  result.params_digest = fnv1a(m.params);
  return result;
}

SeedStats run_seeds(const model::ModelConfig& config, const Dataset& dataset,
                    const HParams& hp_base, const std::vector<std::uint64_t>& seeds, int workers) {
  if (seeds.empty()) throw TrainError("run_seeds: need at least one seed");
  SeedStats stats;
  stats.results.resize(seeds.size());
  std::vector<std::string> errors(seeds.size());

  auto run_one = [&](std::size_t k) {
    try {
      HParams hp = hp_base;
      hp.seed = seeds[k];
      model::ModelConfig cfg = config;
      cfg.residual.beta = hp.beta;
      cfg.dropout = hp.dropout;
      model::Model m = model::build_model(cfg, dataset, hp.seed);
      stats.results[k] = train(m, dataset, hp);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };

  const int pool = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
  if (pool == 1) {
    for (std::size_t k = 0; k < seeds.size(); ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < pool; ++t)
      threads.emplace_back([&] {
        for (std::size_t k = next.fetch_add(1); k < seeds.size(); k = next.fetch_add(1))
          run_one(k);
      });
    for (auto& t : threads) t.join();
  }

  for (std::size_t k = 0; k < seeds.size(); ++k)
    if (!errors[k].empty())
      throw TrainError("seed " + std::to_string(seeds[k]) + " failed: " + errors[k]);

  for (const TrainResult& r : stats.results) stats.per_seed.push_back(r.test_at_best);
  double mean = 0.0;
  for (double v : stats.per_seed) mean += v;
  mean /= static_cast<double>(stats.per_seed.size());
  double var = 0.0;
  for (double v : stats.per_seed) var += (v - mean) * (v - mean);
  var /= static_cast<double>(stats.per_seed.size());
  stats.mean = mean;
  stats.stddev = std::sqrt(var);
  return stats;
}

SweepResult hparam_sweep(const SweepGrid& grid, const model::ModelConfig& config,
                         const Dataset& dataset, const HParams& hp_base,
                         const std::vector<std::uint64_t>& seeds, int workers) {
  if (grid.learning_rates.empty() || grid.weight_decays.empty())
    throw TrainError("hparam_sweep: empty grid");
  const std::vector<double> betas =
      grid.betas.empty() ? std::vector<double>{hp_base.beta} : grid.betas;

  SweepResult result;
  for (double lr : grid.learning_rates) {
    for (double wd : grid.weight_decays) {
      for (double beta : betas) {
        SweepRow row;
        row.hp = hp_base;
        row.hp.learning_rate = lr;
        row.hp.weight_decay = wd;
        row.hp.beta = beta;
        try {
          const SeedStats stats = run_seeds(config, dataset, row.hp, seeds, workers);
          double val = 0.0;
          for (const TrainResult& r : stats.results) val += r.val_at_best;
          row.val_mean = val / static_cast<double>(stats.results.size());
          row.test_mean = stats.mean;
        } catch (const TrainError&) {
          row.diverged = true;
        }
        result.rows.push_back(row);
      }
    }
  }

  bool found = false;
  for (const SweepRow& row : result.rows) {
    if (row.diverged) continue;
    const bool better =
        !found || row.val_mean > result.best_val_mean ||
        (row.val_mean == result.best_val_mean &&
         (row.hp.learning_rate < result.best.learning_rate ||
          (row.hp.learning_rate == result.best.learning_rate &&
           row.hp.weight_decay < result.best.weight_decay)));
    if (better) {
      result.best = row.hp;
      result.best_val_mean = row.val_mean;
      found = true;
    }
  }
  if (!found) throw TrainError("hparam_sweep: every grid point diverged");
  return result;
}

}  // namespace gatlab::trainer
