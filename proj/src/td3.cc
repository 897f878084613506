#include "akhcfs/td3.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "akhcfs/errors.h"

namespace akhcfs {

namespace {

constexpr const char* kCheckpointFormat = "akhcfs-td3-checkpoint";
constexpr int kCheckpointVersion = 1;

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}


}  // namespace

nlohmann::json hyper_to_json(const Td3Hyper& h) {
  return nlohmann::json{{"learning_rate", h.learning_rate}, {"policy_delay", h.policy_delay},
                        {"act_noise", h.act_noise},         {"target_noise", h.target_noise},
                        {"noise_clip", h.noise_clip},       {"gamma", h.gamma},
                        {"tau", h.tau},                     {"batch_size", h.batch_size},
                        {"memory_size", h.memory_size},     {"hidden", h.hidden},
                        {"a_bound", h.a_bound},             {"optimizer", optimizer_name(h.optimizer)}};
}

Td3Hyper hyper_from_json(const nlohmann::json& j) {
  Td3Hyper h;
  h.learning_rate = j.at("learning_rate").get<double>();
  h.policy_delay = j.at("policy_delay").get<int>();
  h.act_noise = j.at("act_noise").get<double>();
  h.target_noise = j.at("target_noise").get<double>();
  h.noise_clip = j.at("noise_clip").get<double>();
  h.gamma = j.at("gamma").get<double>();
  h.tau = j.at("tau").get<double>();
  h.batch_size = j.at("batch_size").get<int>();
  h.memory_size = j.at("memory_size").get<int>();
  h.hidden = j.at("hidden").get<std::vector<int>>();
  h.a_bound = j.at("a_bound").get<double>();
  h.optimizer = optimizer_from(j.at("optimizer").get<std::string>());
  return h;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  data_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch,
                                                      std::mt19937_64& rng) const {
  const std::size_t n = data_.size();
  if (batch > n) throw std::invalid_argument("replay buffer holds fewer transitions than the batch");
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    const std::size_t t = dist(rng);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, const Mlp& net, double learning_rate)
    : kind_(kind), lr_(learning_rate) {
  if (kind_ == OptimizerKind::adam) {
    m_.assign(net.parameter_count(), 0.0);
    v_.assign(net.parameter_count(), 0.0);
  }
}

void Optimizer::step(Mlp& net, const MlpGradients& grads) {
  if (kind_ == OptimizerKind::sgd) {
    net.apply_sgd(grads, lr_);
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const auto g = Mlp::flatten(grads);
  auto p = net.flat_parameters();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * g[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
  net.set_flat_parameters(p);
}

nlohmann::json Optimizer::to_json() const {
  return nlohmann::json{{"kind", optimizer_name(kind_)}, {"learning_rate", lr_}, {"t", t_},
                        {"m", m_},                       {"v", v_}};
}

Optimizer Optimizer::from_json(const nlohmann::json& j, const Mlp& net) {
  Optimizer o(optimizer_from(j.at("kind").get<std::string>()), net,
              j.at("learning_rate").get<double>());
  o.t_ = j.at("t").get<std::int64_t>();
  o.m_ = j.at("m").get<std::vector<double>>();
  o.v_ = j.at("v").get<std::vector<double>>();
  return o;
}

Mlp make_actor(const Td3Hyper& hyper) {
  std::vector<int> sizes{static_cast<int>(kObservationSize)};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(1);
  return Mlp(sizes, Activation::tanh, Activation::tanh, hyper.a_bound);
}

Mlp make_critic(const Td3Hyper& hyper) {
  std::vector<int> sizes{static_cast<int>(kObservationSize) + 1};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(1);
  return Mlp(sizes, Activation::tanh, Activation::identity, 1.0);
}

Td3Agent::Td3Agent(const Td3Hyper& hyper, std::uint64_t seed) : hyper_(hyper), rng_(seed) {
  if (!(hyper.gamma > 0.0 && hyper.gamma < 1.0)) throw ConfigError("td3 gamma must lie in (0,1)");
  if (hyper.batch_size <= 0 || hyper.policy_delay <= 0 || hyper.memory_size <= 0) {
    throw ConfigError("td3 batch_size, policy_delay and memory_size must be positive");
  }
  actor_ = make_actor(hyper);
  critic1_ = make_critic(hyper);
  critic2_ = make_critic(hyper);
  actor_.init_uniform(rng_);
  critic1_.init_uniform(rng_);
  critic2_.init_uniform(rng_);
  actor_target_ = actor_;
  critic1_target_ = critic1_;
  critic2_target_ = critic2_;
  reset_optimizers();
}

void Td3Agent::reset_optimizers() {
  actor_opt_ = Optimizer(hyper_.optimizer, actor_, hyper_.learning_rate);
  critic1_opt_ = Optimizer(hyper_.optimizer, critic1_, hyper_.learning_rate);
  critic2_opt_ = Optimizer(hyper_.optimizer, critic2_, hyper_.learning_rate);
}

double Td3Agent::act(const NormalizedObservation& obs) const { return actor_.forward_scalar(obs); }

double Td3Agent::select_action(const NormalizedObservation& obs, bool explore,
                               std::mt19937_64& rng) const {
  double a = act(obs);
  if (explore) {
    std::normal_distribution<double> noise(0.0, hyper_.act_noise * hyper_.a_bound);
    a += noise(rng);
  }
  return std::clamp(a, -hyper_.a_bound, hyper_.a_bound);
}

double Td3Agent::select_action(const NormalizedObservation& obs, bool explore) {
  return select_action(obs, explore, rng_);
}

double Td3Agent::q1(const NormalizedObservation& obs, double action) const {
  std::array<double, kObservationSize + 1> x{};
  std::copy(obs.begin(), obs.end(), x.begin());
  x.back() = action / hyper_.a_bound;
  return critic1_.forward_scalar(x);
}

double Td3Agent::q2(const NormalizedObservation& obs, double action) const {
  std::array<double, kObservationSize + 1> x{};
  std::copy(obs.begin(), obs.end(), x.begin());
  x.back() = action / hyper_.a_bound;
  return critic2_.forward_scalar(x);
}

Eigen::MatrixXd Td3Agent::critic_input(const Eigen::MatrixXd& obs,
                                       const Eigen::MatrixXd& actions) const {
  Eigen::MatrixXd x(obs.rows() + 1, obs.cols());
  x.topRows(obs.rows()) = obs;
  x.bottomRows(1) = actions / hyper_.a_bound;
  return x;
}

BatchTargets Td3Agent::compute_targets(const std::vector<const Transition*>& batch) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(kObservationSize);
  Eigen::MatrixXd next_obs(d, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      next_obs(r, c) = batch[static_cast<std::size_t>(c)]->next_obs[static_cast<std::size_t>(r)];
    }
  }
  BatchTargets out;
  out.target_actions = actor_target_.forward(next_obs);
  if (hyper_.target_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, hyper_.target_noise * hyper_.a_bound);
    const double clip = hyper_.noise_clip * hyper_.a_bound;
    for (Eigen::Index c = 0; c < b; ++c) {
      out.target_actions(0, c) += std::clamp(noise(rng_), -clip, clip);
    }
  }
  out.target_actions = out.target_actions.cwiseMax(-hyper_.a_bound).cwiseMin(hyper_.a_bound);

  const Eigen::MatrixXd x2 = critic_input(next_obs, out.target_actions);
  const Eigen::MatrixXd q1t = critic1_target_.forward(x2);
  const Eigen::MatrixXd q2t = critic2_target_.forward(x2);
  out.y.resize(1, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto& t = *batch[static_cast<std::size_t>(c)];
    const double bootstrap = t.done ? 0.0 : hyper_.gamma * std::min(q1t(0, c), q2t(0, c));
    out.y(0, c) = t.reward + bootstrap;
  }
  return out;
}

UpdateDiagnostics Td3Agent::update(const ReplayBuffer& buffer) {
  const auto batch_size = static_cast<std::size_t>(hyper_.batch_size);
  if (buffer.size() < batch_size) {
    throw std::logic_error("replay buffer is not yet filled to the batch size");
  }
  const auto indices = buffer.sample_indices(batch_size, rng_);
  std::vector<const Transition*> batch;
  batch.reserve(indices.size());
  for (auto i : indices) batch.push_back(&buffer.at(i));

  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(kObservationSize);
  Eigen::MatrixXd obs(d, b);
  Eigen::MatrixXd actions(1, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto& t = *batch[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < d; ++r) obs(r, c) = t.obs[static_cast<std::size_t>(r)];
    actions(0, c) = t.action;
  }

  const auto targets = compute_targets(batch);
  const Eigen::MatrixXd x = critic_input(obs, actions);
  const double inv_b = 1.0 / static_cast<double>(b);

  UpdateDiagnostics diag;
  const auto critic_step = [&](Mlp& critic, Optimizer& opt) {
    Mlp::Cache cache;
    const Eigen::MatrixXd q = critic.forward(x, cache);
    const Eigen::MatrixXd err = q - targets.y;
    const auto grads = critic.backward(cache, 2.0 * inv_b * err);
    opt.step(critic, grads);
    return err.squaredNorm() * inv_b;
  };
  diag.critic1_loss = critic_step(critic1_, critic1_opt_);
  diag.critic2_loss = critic_step(critic2_, critic2_opt_);
  if (!std::isfinite(diag.critic1_loss) || !std::isfinite(diag.critic2_loss)) {
    throw NumericError("critic loss diverged");
  }
  ++updates_;

  if (updates_ % hyper_.policy_delay == 0) {
    Mlp::Cache actor_cache;
    const Eigen::MatrixXd pi = actor_.forward(obs, actor_cache);
    Mlp::Cache critic_cache;
    const Eigen::MatrixXd q = critic1_.forward(critic_input(obs, pi), critic_cache);
    Eigen::MatrixXd grad_in;
    // Ascend Q1: loss = -mean(Q1(s, pi(s))).
    critic1_.backward(critic_cache, Eigen::MatrixXd::Constant(1, b, -inv_b), &grad_in);
    const Eigen::MatrixXd grad_action = grad_in.bottomRows(1) / hyper_.a_bound;
    actor_opt_.step(actor_, actor_.backward(actor_cache, grad_action));

    actor_target_.soft_update_from(actor_, hyper_.tau);
    critic1_target_.soft_update_from(critic1_, hyper_.tau);
    critic2_target_.soft_update_from(critic2_, hyper_.tau);
    diag.actor_updated = true;
    diag.actor_q = q.mean();
  }
  return diag;
}

nlohmann::json Td3Agent::to_json() const {
  std::ostringstream rng_state;
  rng_state << rng_;
  return nlohmann::json{
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"hyper", hyper_to_json(hyper_)},
      {"updates", updates_},
      {"rng", rng_state.str()},
      {"networks",
       {{"actor", mlp_to_json(actor_)},
        {"actor_target", mlp_to_json(actor_target_)},
        {"critic1", mlp_to_json(critic1_)},
        {"critic2", mlp_to_json(critic2_)},
        {"critic1_target", mlp_to_json(critic1_target_)},
        {"critic2_target", mlp_to_json(critic2_target_)}}},
      {"optimizers",
       {{"actor", actor_opt_.to_json()},
        {"critic1", critic1_opt_.to_json()},
        {"critic2", critic2_opt_.to_json()}}}};
}

Td3Agent Td3Agent::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw DataError("not a TD3 checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version");
    }
    Td3Agent a;
    a.hyper_ = hyper_from_json(j.at("hyper"));
    a.updates_ = j.at("updates").get<std::int64_t>();
    std::istringstream rng_state(j.at("rng").get<std::string>());
    rng_state >> a.rng_;
    const auto& n = j.at("networks");
    a.actor_ = mlp_from_json(n.at("actor"));
    a.actor_target_ = mlp_from_json(n.at("actor_target"));
    a.critic1_ = mlp_from_json(n.at("critic1"));
    a.critic2_ = mlp_from_json(n.at("critic2"));
    a.critic1_target_ = mlp_from_json(n.at("critic1_target"));
    a.critic2_target_ = mlp_from_json(n.at("critic2_target"));
    if (!a.actor_.same_shape(make_actor(a.hyper_)) || !a.critic1_.same_shape(make_critic(a.hyper_))) {
      throw DataError("checkpoint network shapes do not match its hyperparameters");
    }
    const auto& o = j.at("optimizers");
    a.actor_opt_ = Optimizer::from_json(o.at("actor"), a.actor_);
    a.critic1_opt_ = Optimizer::from_json(o.at("critic1"), a.critic1_);
    a.critic2_opt_ = Optimizer::from_json(o.at("critic2"), a.critic2_);
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void Td3Agent::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << to_json().dump() << '\n';
}

Td3Agent Td3Agent::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace akhcfs
