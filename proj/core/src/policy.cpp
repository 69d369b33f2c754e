#include "comex/policy.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "comex/checkpoint.hpp"

namespace comex {

ActionDistribution masked_distribution(std::span<const double> logits, const ActionMask& mask) {
  if (logits.size() != kNumActions) throw std::invalid_argument("masked_distribution: expected 10 logits");
  std::vector<bool> available(kNumActions);
  nn::Vector l(kNumActions);
  for (int a = 0; a < kNumActions; ++a) {
    available[a] = mask.test(a);
    l[a] = logits[a];
  }
  const nn::Vector log_probs = nn::masked_log_softmax(l, available);
  ActionDistribution dist;
  for (int a = 0; a < kNumActions; ++a) {
    dist.log_probs[a] = log_probs[a];
    dist.probs[a] = available[a] ? std::exp(log_probs[a]) : 0.0;
  }
  return dist;
}

ActionId sample(const ActionDistribution& dist, Rng& rng) {
  const double u = rng.uniform01();
  double cumulative = 0.0;
  ActionId last = -1;
  for (int a = 0; a < kNumActions; ++a) {
    if (dist.probs[a] <= 0.0) continue;
    cumulative += dist.probs[a];
    last = a;
    if (u < cumulative) return a;
  }
  if (last < 0) throw std::invalid_argument("sample: distribution has no support");
  return last;  // rounding left u just above the final cumulative sum
}

ActionId masked_sample(std::span<const double> logits, const ActionMask& mask, Rng& rng) {
  return sample(masked_distribution(logits, mask), rng);
}

nn::Matrix actor_forward(const Network& actor, const Observation& obs) {
  const std::vector<double> f = obs.features();
  const nn::Matrix x = Eigen::Map<const nn::Matrix>(f.data(), static_cast<Eigen::Index>(f.size()), 1);
  return actor.forward(x);
}

NetworkPolicy::NetworkPolicy(Network actor, std::string label)
    : actor_(std::move(actor)), label_(std::move(label)) {
  if (actor_.role() != NetRole::Actor) throw std::invalid_argument("NetworkPolicy needs an actor network");
}

ActionId NetworkPolicy::act(const Observation& obs, Rng& rng) const {
  const nn::Matrix logits = actor_forward(actor_, obs);
  return masked_sample(std::span<const double>(logits.data(), kNumActions), obs.mask, rng);
}

namespace {

ActionId uniform_available(const ActionMask& mask, int first, int last, Rng& rng) {
  std::vector<ActionId> options;
  for (int a = first; a < last; ++a) {
    if (mask.test(a)) options.push_back(a);
  }
  if (options.empty()) return -1;
  return options[rng.uniform_index(options.size())];
}

}  // namespace

ActionId RandomPolicy::act(const Observation& obs, Rng& rng) const {
  const ActionId a = uniform_available(obs.mask, 0, kNumActions, rng);
  return a < 0 ? kStay : a;
}

namespace {

// Lexicographic choice over available moves with at least one frontier.
template <typename Better>
ActionId pick_frontier_move(const Observation& obs, Rng& rng, Better better) {
  ActionId best = -1;
  for (int d = 0; d < kNumDirections; ++d) {
    if (!obs.mask.test(d) || obs.fpr[3 * d] <= 0.0) continue;
    if (best < 0 || better(d, best)) best = d;
  }
  if (best >= 0) return best;
  const ActionId a = uniform_available(obs.mask, 0, kNumDirections, rng);
  return a < 0 ? kStay : a;
}

}  // namespace

ActionId baseline_greedy_frontier(const Observation& obs, Rng& rng) {
  return pick_frontier_move(obs, rng, [&](int d, int best) {
    const double mean = obs.fpr[3 * d + 1], best_mean = obs.fpr[3 * best + 1];
    return mean < best_mean || (mean == best_mean && obs.fpr[3 * d] > obs.fpr[3 * best]);
  });
}

ActionId baseline_greedy_count(const Observation& obs, Rng& rng) {
  return pick_frontier_move(obs, rng, [&](int d, int best) {
    const double count = obs.fpr[3 * d], best_count = obs.fpr[3 * best];
    return count > best_count || (count == best_count && obs.fpr[3 * d + 1] < obs.fpr[3 * best + 1]);
  });
}

ActionId baseline_comm_on_contact(const Observation& obs, Rng& rng) {
  int in_range = 0;
  for (double bit : obs.net) in_range += bit > 0.5 ? 1 : 0;
  if (in_range >= 2 && rng.uniform01() < 0.5) return kCommunicate;
  return baseline_greedy_frontier(obs, rng);
}

std::vector<std::shared_ptr<const Policy>> make_policies(const std::string& spec, int n_agents) {
  std::vector<std::string> names;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) names.push_back(item);
  }
  if (names.empty()) throw UnknownPolicyError("empty policy specification");
  if (names.size() != 1 && static_cast<int>(names.size()) != n_agents)
    throw UnknownPolicyError("policy list must name 1 or " + std::to_string(n_agents) + " policies");

  std::vector<std::shared_ptr<const Policy>> out;
  for (int i = 0; i < n_agents; ++i) {
    const std::string& name = names.size() == 1 ? names[0] : names[i];
    if (name == "greedy") {
      out.push_back(std::make_shared<GreedyFrontierPolicy>());
    } else if (name == "greedy-count") {
      out.push_back(std::make_shared<GreedyCountPolicy>());
    } else if (name == "comm") {
      out.push_back(std::make_shared<CommOnContactPolicy>());
    } else if (name == "random") {
      out.push_back(std::make_shared<RandomPolicy>());
    } else if (name == "stay") {
      out.push_back(std::make_shared<StayPolicy>());
    } else if (std::filesystem::is_regular_file(name)) {
      const auto networks = load_checkpoint(name);
      std::vector<const NamedNetwork*> actors;
      for (const auto& nnw : networks) {
        if (nnw.network.role() == NetRole::Actor) actors.push_back(&nnw);
      }
      if (actors.empty()) throw UnknownPolicyError("checkpoint '" + name + "' contains no actor");
      const NamedNetwork* chosen = actors.front();
      const std::string wanted = "actor_" + std::to_string(i);
      for (const auto* a : actors) {
        if (a->name == wanted) chosen = a;
      }
      if (chosen->network.spec().n_agents != n_agents)
        throw UnknownPolicyError("checkpoint '" + name + "' was built for " +
                                 std::to_string(chosen->network.spec().n_agents) + " agents");
      out.push_back(std::make_shared<NetworkPolicy>(chosen->network, name + ":" + chosen->name));
    } else {
      throw UnknownPolicyError("unknown policy '" + name + "' (expected greedy, greedy-count, comm, random, stay or a checkpoint file)");
    }
  }
  return out;
}

}  // namespace comex
