// Copyright 2026 The firm-planar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FIRM_PPO_HPP_
#define FIRM_PPO_HPP_

#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "firm/nn.hpp"
#include "firm/rl_env.hpp"

namespace firm {

struct PpoConfig {
  int iterations = 500;
  int num_envs = 64;
  int steps_per_env = 24;
  double lr = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 5;
  int minibatches = 4;
  double entropy_coef = 0.005;
  double vf_coef = 1.0;
  double max_grad_norm = 1.0;
  double init_logstd = -1.0;
  double action_scale = 0.5;  // env action = scale * raw policy output
  std::vector<int> hidden = {512, 256};
  uint64_t seed = 1;
  std::string log_path;         // per-iteration CSV; empty disables
  std::string checkpoint_path;  // final (and divergence-snapshot) checkpoint
};

// Gaussian policy with a state-independent learned log-std, plus a separate
// critic over the privileged observation.
class GaussianActorCritic : public Module {
 public:
  GaussianActorCritic() = default;
  GaussianActorCritic(int obs_dim, int critic_obs_dim, int act_dim,
                      const std::vector<int>& hidden, double init_logstd, Rng& rng)
      : obs_dim_(obs_dim), critic_obs_dim_(critic_obs_dim), act_dim_(act_dim) {
    MlpSpec actor_spec;
    actor_spec.layer_widths.push_back(obs_dim);
    for (int h : hidden) actor_spec.layer_widths.push_back(h);
    actor_spec.layer_widths.push_back(act_dim);
    actor_spec.activation = Activation::kSilu;
    actor_ = Mlp("actor", actor_spec, rng);
    // small final layer so the initial policy stays near the default pose
    Linear& last = actor_.layers().back();
    for (double& w : last.weight().value.data) w *= 0.01;
    last.bias().value.fill(0.0);

    MlpSpec critic_spec;
    critic_spec.layer_widths.push_back(critic_obs_dim);
    for (int h : hidden) critic_spec.layer_widths.push_back(h);
    critic_spec.layer_widths.push_back(1);
    critic_spec.activation = Activation::kSilu;
    critic_ = Mlp("critic", critic_spec, rng);

    log_std_ = Parameter("log_std", Tensor::full({act_dim}, init_logstd));
  }

  int obs_dim() const { return obs_dim_; }
  int critic_obs_dim() const { return critic_obs_dim_; }
  int act_dim() const { return act_dim_; }
  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  Parameter& log_std() { return log_std_; }

  Tensor actor_mean(const Tensor& obs) const { return actor_.infer(obs); }

  // Denormalized value estimate. The critic head regresses returns scaled by
  // running statistics so its loss gradient stays O(1) regardless of the
  // reward magnitude.
  Tensor critic_value(const Tensor& critic_obs) const {
    Tensor v = critic_.infer(critic_obs);
    for (double& x : v.data) x = x * value_std_ + value_mean_;
    return v;
  }

  double value_mean() const { return value_mean_; }
  double value_std() const { return value_std_; }
  void update_value_norm(double batch_mean, double batch_std, double ema) {
    if (!value_norm_init_) {
      value_mean_ = batch_mean;
      value_std_ = std::max(batch_std, 1e-6);
      value_norm_init_ = true;
    } else {
      value_mean_ = (1.0 - ema) * value_mean_ + ema * batch_mean;
      value_std_ = std::max((1.0 - ema) * value_std_ + ema * batch_std, 1e-6);
    }
  }

  double logprob_row(const std::vector<double>& raw_action,
                     const double* mean) const {
    double lp = -0.5 * act_dim_ * std::log(2.0 * M_PI);
    for (int a = 0; a < act_dim_; ++a) {
      double ls = log_std_.value.data[static_cast<size_t>(a)];
      double sigma = std::exp(ls);
      double z = (raw_action[static_cast<size_t>(a)] - mean[a]) / sigma;
      lp += -0.5 * z * z - ls;
    }
    return lp;
  }

  void collect(std::vector<Parameter*>& out) override {
    actor_.collect(out);
    critic_.collect(out);
    out.push_back(&log_std_);
  }

  std::vector<Parameter*> actor_parameters() {
    std::vector<Parameter*> out;
    actor_.collect(out);
    out.push_back(&log_std_);
    return out;
  }

  void save(const std::string& path, const std::string& meta) {
    Checkpoint c;
    c.meta = meta;
    save_module(c, *this);
    c.add("value_norm", Tensor({2}, {value_mean_, value_std_}));
    c.save(path);
  }

  void load(const std::string& path) {
    Checkpoint c = Checkpoint::load(path);
    load_module(c, *this);
    if (c.has("value_norm")) {
      const Tensor& vn = c.get("value_norm");
      value_mean_ = vn.data[0];
      value_std_ = vn.data[1];
      value_norm_init_ = true;
    }
  }

 private:
  int obs_dim_ = 0, critic_obs_dim_ = 0, act_dim_ = 0;
  Mlp actor_, critic_;
  Parameter log_std_;
  double value_mean_ = 0.0, value_std_ = 1.0;
  bool value_norm_init_ = false;
};

struct PpoBatch {
  Tensor obs;       // [M, obs]
  Tensor critic_obs;
  Tensor actions;   // raw (unscaled) policy outputs
  Tensor logp_old;  // [M]
  Tensor adv;       // [M], normalized by the caller
  Tensor ret;       // [M, 1]
};

struct PpoUpdateStats {
  double loss = 0.0, pg_loss = 0.0, v_loss = 0.0, entropy = 0.0;
  double approx_kl = 0.0, clip_frac = 0.0;
};

// Builds the clipped-surrogate loss on one minibatch and accumulates
// gradients. The caller zeroes gradients and applies the optimizer step.
inline PpoUpdateStats ppo_loss_and_backward(GaussianActorCritic& net,
                                            const PpoBatch& mb,
                                            const PpoConfig& cfg) {
  int act_dim = net.act_dim();
  Tape t;
  auto mean = net.actor().forward(t, t.input(mb.obs));
  auto logstd = t.param(net.log_std());
  auto inv_sigma = t.exp_op(t.neg(logstd));
  auto z = t.mul(t.sub(t.input(mb.actions), mean), inv_sigma);
  auto z2_sum = t.sum_lastdim(t.mul(z, z));
  auto sum_logstd = t.sum_all(logstd);
  auto logp = t.sub(t.affine(z2_sum, -0.5, -0.5 * act_dim * std::log(2.0 * M_PI)),
                    sum_logstd);
  auto logratio = t.sub(logp, t.input(mb.logp_old));
  auto ratio = t.exp_op(logratio);
  auto surr1 = t.mul(ratio, t.input(mb.adv));
  auto surr2 = t.mul(t.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), t.input(mb.adv));
  auto pg_loss = t.neg(t.mean_all(t.minimum(surr1, surr2)));

  Tensor ret_norm = mb.ret;
  for (double& v : ret_norm.data)
    v = (v - net.value_mean()) / net.value_std();
  auto value = net.critic().forward(t, t.input(mb.critic_obs));
  auto v_loss = t.scale(t.mse(value, ret_norm), 0.5);

  double ent_const = 0.5 * act_dim * (1.0 + std::log(2.0 * M_PI));
  auto entropy = t.affine(t.sum_all(logstd), 1.0, ent_const);

  auto loss = t.add(pg_loss, t.scale(v_loss, cfg.vf_coef));
  loss = t.sub(loss, t.scale(entropy, cfg.entropy_coef));
  t.backward(loss);

  PpoUpdateStats stats;
  stats.loss = t.val(loss).data[0];
  stats.pg_loss = t.val(pg_loss).data[0];
  stats.v_loss = t.val(v_loss).data[0];
  stats.entropy = t.val(entropy).data[0];
  int64_t m = t.val(ratio).numel();
  for (int64_t i = 0; i < m; ++i) {
    double r = t.val(ratio).data[i];
    double lr_ = t.val(logratio).data[i];
    stats.approx_kl += (r - 1.0) - lr_;
    if (std::abs(r - 1.0) > cfg.clip) stats.clip_frac += 1.0;
  }
  stats.approx_kl /= static_cast<double>(m);
  stats.clip_frac /= static_cast<double>(m);
  return stats;
}

struct PpoLogRow {
  int iteration = 0;
  int64_t env_steps = 0;
  double mean_step_reward = 0.0;
  double mean_ep_return = 0.0;
  double mean_ep_len = 0.0;
  int episodes_done = 0;
  PpoUpdateStats stats;
  std::array<double, kNumRewardTerms> term_means{};

  static std::string csv_header() {
    std::string h =
        "iteration,env_steps,mean_step_reward,mean_ep_return,mean_ep_len,"
        "episodes_done,loss,pg_loss,v_loss,entropy,approx_kl,clip_frac";
    for (const auto& n : reward_term_names()) h += "," + n;
    return h;
  }

  std::string csv_row() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%d,%lld,%.9g,%.9g,%.6g,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  iteration, static_cast<long long>(env_steps), mean_step_reward,
                  mean_ep_return, mean_ep_len, episodes_done, stats.loss,
                  stats.pg_loss, stats.v_loss, stats.entropy, stats.approx_kl,
                  stats.clip_frac);
    std::string row = buf;
    for (double v : term_means) {
      std::snprintf(buf, sizeof(buf), ",%.9g", v);
      row += buf;
    }
    return row;
  }
};

struct PpoTrainResult {
  std::shared_ptr<GaussianActorCritic> net;
  std::vector<PpoLogRow> log;
};

// Clipped-surrogate PPO with GAE over a fleet of environments. Strictly
// serial: rollouts, updates, and RNG draws happen in one fixed order.
inline PpoTrainResult ppo_train(
    const std::function<std::unique_ptr<FallRecoverEnv>(int)>& env_factory,
    const PpoConfig& cfg) {
  if (cfg.num_envs < 1) throw ConfigError("ppo: num_envs must be >= 1");
  std::vector<std::unique_ptr<FallRecoverEnv>> envs;
  envs.reserve(static_cast<size_t>(cfg.num_envs));
  for (int e = 0; e < cfg.num_envs; ++e) envs.push_back(env_factory(e));

  int obs_dim = envs[0]->actor_obs_dim();
  int cobs_dim = envs[0]->critic_obs_dim();
  int act_dim = envs[0]->action_dim();
  Rng init_rng = Rng::derive(cfg.seed, "ppo_init");
  auto net = std::make_shared<GaussianActorCritic>(obs_dim, cobs_dim, act_dim,
                                                   cfg.hidden, cfg.init_logstd,
                                                   init_rng);
  Adam opt(net->parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
  Rng action_rng = Rng::derive(cfg.seed, "ppo_actions");
  Rng shuffle_rng = Rng::derive(cfg.seed, "ppo_shuffle");

  int n_steps = cfg.steps_per_env;
  int n_envs = cfg.num_envs;
  int64_t batch = static_cast<int64_t>(n_steps) * n_envs;

  // persistent per-env observation state
  std::vector<std::vector<double>> cur_obs(static_cast<size_t>(n_envs));
  std::vector<std::vector<double>> cur_cobs(static_cast<size_t>(n_envs));
  std::vector<double> ep_return(static_cast<size_t>(n_envs), 0.0);
  std::vector<int> ep_len(static_cast<size_t>(n_envs), 0);
  for (int e = 0; e < n_envs; ++e) {
    EnvStepResult r = envs[static_cast<size_t>(e)]->reset();
    cur_obs[static_cast<size_t>(e)] = r.actor_obs;
    cur_cobs[static_cast<size_t>(e)] = r.critic_obs;
  }

  std::ofstream log_file;
  if (!cfg.log_path.empty()) {
    log_file.open(cfg.log_path);
    if (!log_file) throw IoError("cannot open ppo log: " + cfg.log_path);
    log_file << PpoLogRow::csv_header() << "\n";
  }

  PpoTrainResult result;
  result.net = net;

  Tensor obs_buf({n_steps, n_envs, obs_dim});
  Tensor cobs_buf({n_steps, n_envs, cobs_dim});
  Tensor act_buf({n_steps, n_envs, act_dim});
  Tensor logp_buf({n_steps, n_envs});
  Tensor val_buf({n_steps, n_envs});
  Tensor rew_buf({n_steps, n_envs});
  Tensor done_buf({n_steps, n_envs});

  int64_t total_steps = 0;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    PpoLogRow row;
    row.iteration = iter;
    double term_sums[kNumRewardTerms] = {};
    double reward_sum = 0.0;
    double ep_return_sum = 0.0;
    int64_t ep_len_sum = 0;
    int ep_count = 0;

    // ----- rollout -----
    for (int step = 0; step < n_steps; ++step) {
      Tensor obs_mat({n_envs, obs_dim});
      Tensor cobs_mat({n_envs, cobs_dim});
      for (int e = 0; e < n_envs; ++e) {
        std::copy(cur_obs[static_cast<size_t>(e)].begin(), cur_obs[static_cast<size_t>(e)].end(),
                  obs_mat.data.begin() + static_cast<int64_t>(e) * obs_dim);
        std::copy(cur_cobs[static_cast<size_t>(e)].begin(), cur_cobs[static_cast<size_t>(e)].end(),
                  cobs_mat.data.begin() + static_cast<int64_t>(e) * cobs_dim);
      }
      Tensor mean = net->actor_mean(obs_mat);
      Tensor value = net->critic_value(cobs_mat);

      for (int e = 0; e < n_envs; ++e) {
        std::vector<double> raw(static_cast<size_t>(act_dim));
        for (int a = 0; a < act_dim; ++a) {
          double sigma = std::exp(net->log_std().value.data[static_cast<size_t>(a)]);
          raw[static_cast<size_t>(a)] =
              mean.data[static_cast<int64_t>(e) * act_dim + a] +
              sigma * action_rng.normal();
        }
        double logp = net->logprob_row(raw, mean.data.data() +
                                                static_cast<int64_t>(e) * act_dim);
        std::vector<double> env_action(raw);
        for (double& v : env_action) v *= cfg.action_scale;

        std::copy(cur_obs[static_cast<size_t>(e)].begin(), cur_obs[static_cast<size_t>(e)].end(),
                  obs_buf.data.begin() + (static_cast<int64_t>(step) * n_envs + e) * obs_dim);
        std::copy(cur_cobs[static_cast<size_t>(e)].begin(), cur_cobs[static_cast<size_t>(e)].end(),
                  cobs_buf.data.begin() + (static_cast<int64_t>(step) * n_envs + e) * cobs_dim);
        std::copy(raw.begin(), raw.end(),
                  act_buf.data.begin() + (static_cast<int64_t>(step) * n_envs + e) * act_dim);
        logp_buf.data[static_cast<int64_t>(step) * n_envs + e] = logp;
        val_buf.data[static_cast<int64_t>(step) * n_envs + e] =
            value.data[static_cast<size_t>(e)];

        EnvStepResult r = envs[static_cast<size_t>(e)]->step(env_action);
        rew_buf.data[static_cast<int64_t>(step) * n_envs + e] = r.reward.total;
        done_buf.data[static_cast<int64_t>(step) * n_envs + e] = r.done ? 1.0 : 0.0;
        reward_sum += r.reward.total;
        ep_return[static_cast<size_t>(e)] += r.reward.total;
        ep_len[static_cast<size_t>(e)] += 1;
        for (int k = 0; k < kNumRewardTerms; ++k)
          term_sums[k] += r.reward.scaled[static_cast<size_t>(k)];

        if (r.done) {
          ep_return_sum += ep_return[static_cast<size_t>(e)];
          ep_len_sum += ep_len[static_cast<size_t>(e)];
          ++ep_count;
          ep_return[static_cast<size_t>(e)] = 0.0;
          ep_len[static_cast<size_t>(e)] = 0;
          r = envs[static_cast<size_t>(e)]->reset();
        }
        cur_obs[static_cast<size_t>(e)] = r.actor_obs;
        cur_cobs[static_cast<size_t>(e)] = r.critic_obs;
      }
      total_steps += n_envs;
    }

    // ----- GAE -----
    Tensor next_cobs({n_envs, cobs_dim});
    for (int e = 0; e < n_envs; ++e)
      std::copy(cur_cobs[static_cast<size_t>(e)].begin(), cur_cobs[static_cast<size_t>(e)].end(),
                next_cobs.data.begin() + static_cast<int64_t>(e) * cobs_dim);
    Tensor next_value = net->critic_value(next_cobs);
    Tensor adv_buf({n_steps, n_envs});
    std::vector<double> lastgaelam(static_cast<size_t>(n_envs), 0.0);
    for (int step = n_steps - 1; step >= 0; --step) {
      for (int e = 0; e < n_envs; ++e) {
        int64_t idx = static_cast<int64_t>(step) * n_envs + e;
        double nonterminal = 1.0 - done_buf.data[idx];
        double vnext = step == n_steps - 1
                           ? next_value.data[static_cast<size_t>(e)]
                           : val_buf.data[idx + n_envs];
        double delta = rew_buf.data[idx] + cfg.gamma * vnext * nonterminal -
                       val_buf.data[idx];
        lastgaelam[static_cast<size_t>(e)] =
            delta + cfg.gamma * cfg.gae_lambda * nonterminal *
                        lastgaelam[static_cast<size_t>(e)];
        adv_buf.data[idx] = lastgaelam[static_cast<size_t>(e)];
      }
    }

    // ----- update -----
    // refresh the running return statistics used to scale critic targets
    {
      double rmean = 0.0, rsq = 0.0;
      for (int64_t i = 0; i < batch; ++i)
        rmean += adv_buf.data[i] + val_buf.data[i];
      rmean /= static_cast<double>(batch);
      for (int64_t i = 0; i < batch; ++i) {
        double d = adv_buf.data[i] + val_buf.data[i] - rmean;
        rsq += d * d;
      }
      net->update_value_norm(rmean, std::sqrt(rsq / static_cast<double>(batch)),
                             0.05);
    }

    std::vector<int64_t> indices(static_cast<size_t>(batch));
    std::iota(indices.begin(), indices.end(), 0);
    int64_t mb_size = batch / cfg.minibatches;
    PpoUpdateStats agg;
    int updates = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Fisher-Yates with the dedicated stream
      for (int64_t i = batch - 1; i > 0; --i) {
        auto j = static_cast<int64_t>(shuffle_rng.uniform_int(0, i));
        std::swap(indices[static_cast<size_t>(i)], indices[static_cast<size_t>(j)]);
      }
      for (int mb = 0; mb < cfg.minibatches; ++mb) {
        int64_t begin = mb * mb_size;
        int64_t count = mb == cfg.minibatches - 1 ? batch - begin : mb_size;
        PpoBatch b;
        b.obs = Tensor({static_cast<int>(count), obs_dim});
        b.critic_obs = Tensor({static_cast<int>(count), cobs_dim});
        b.actions = Tensor({static_cast<int>(count), act_dim});
        b.logp_old = Tensor({static_cast<int>(count)});
        b.adv = Tensor({static_cast<int>(count)});
        b.ret = Tensor({static_cast<int>(count), 1});
        double adv_mean = 0.0, adv_sq = 0.0;
        for (int64_t i = 0; i < count; ++i) {
          int64_t src = indices[static_cast<size_t>(begin + i)];
          std::copy_n(obs_buf.data.begin() + src * obs_dim, obs_dim,
                      b.obs.data.begin() + i * obs_dim);
          std::copy_n(cobs_buf.data.begin() + src * cobs_dim, cobs_dim,
                      b.critic_obs.data.begin() + i * cobs_dim);
          std::copy_n(act_buf.data.begin() + src * act_dim, act_dim,
                      b.actions.data.begin() + i * act_dim);
          b.logp_old.data[i] = logp_buf.data[src];
          b.adv.data[i] = adv_buf.data[src];
          b.ret.data[i] = adv_buf.data[src] + val_buf.data[src];
          adv_mean += b.adv.data[i];
        }
        adv_mean /= static_cast<double>(count);
        for (int64_t i = 0; i < count; ++i)
          adv_sq += (b.adv.data[i] - adv_mean) * (b.adv.data[i] - adv_mean);
        double adv_std = std::sqrt(adv_sq / static_cast<double>(count));
        for (int64_t i = 0; i < count; ++i)
          b.adv.data[i] = (b.adv.data[i] - adv_mean) / (adv_std + 1e-8);

        net->zero_grad();
        PpoUpdateStats stats = ppo_loss_and_backward(*net, b, cfg);
        if (!std::isfinite(stats.loss)) {
          if (!cfg.checkpoint_path.empty())
            net->save(cfg.checkpoint_path + ".diverged", "{\"diverged\":true}");
          throw Error("ppo: non-finite loss at iteration " + std::to_string(iter));
        }
        // clip per head so one loss scale cannot drown the other
        clip_grad_norm(net->actor_parameters(), cfg.max_grad_norm);
        std::vector<Parameter*> critic_params;
        net->critic().collect(critic_params);
        clip_grad_norm(critic_params, cfg.max_grad_norm);
        opt.step();
        agg.loss += stats.loss;
        agg.pg_loss += stats.pg_loss;
        agg.v_loss += stats.v_loss;
        agg.entropy += stats.entropy;
        agg.approx_kl += stats.approx_kl;
        agg.clip_frac += stats.clip_frac;
        ++updates;
      }
    }
    agg.loss /= updates;
    agg.pg_loss /= updates;
    agg.v_loss /= updates;
    agg.entropy /= updates;
    agg.approx_kl /= updates;
    agg.clip_frac /= updates;

    row.env_steps = total_steps;
    row.mean_step_reward = reward_sum / static_cast<double>(batch);
    row.mean_ep_return = ep_count > 0 ? ep_return_sum / ep_count
                         : (result.log.empty() ? 0.0 : result.log.back().mean_ep_return);
    row.mean_ep_len = ep_count > 0 ? static_cast<double>(ep_len_sum) / ep_count : 0.0;
    row.episodes_done = ep_count;
    row.stats = agg;
    for (int k = 0; k < kNumRewardTerms; ++k)
      row.term_means[static_cast<size_t>(k)] = term_sums[k] / static_cast<double>(batch);
    result.log.push_back(row);
    if (log_file) log_file << row.csv_row() << "\n";
  }

  if (!cfg.checkpoint_path.empty()) {
    std::string meta = "{\"kind\":\"actor_critic\",\"obs_dim\":" +
                       std::to_string(obs_dim) + ",\"critic_obs_dim\":" +
                       std::to_string(cobs_dim) + ",\"act_dim\":" +
                       std::to_string(act_dim) + ",\"action_scale\":" +
                       std::to_string(cfg.action_scale) + "}";
    net->save(cfg.checkpoint_path, meta);
  }
  return result;
}

}  // namespace firm

#endif  // FIRM_PPO_HPP_
