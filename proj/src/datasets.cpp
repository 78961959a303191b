#include "rote/datasets.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rote::data {

std::vector<Interaction> load_interactions(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_interactions: cannot open " + path);
  std::vector<Interaction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos)
      throw std::runtime_error("load_interactions: malformed line " + std::to_string(lineno) +
                               " in " + path);
    Interaction in;
    in.user = line.substr(0, tab1);
    in.item = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string ts_text = line.substr(tab2 + 1);
    try {
      std::size_t pos = 0;
      in.ts = std::stoll(ts_text, &pos);
      if (pos != ts_text.size()) throw std::invalid_argument("trailing garbage");
    } catch (const std::exception&) {
      throw std::runtime_error("load_interactions: non-integer timestamp at line " +
                               std::to_string(lineno) + " in " + path);
    }
    if (in.ts < 0)
      throw std::runtime_error("load_interactions: negative timestamp at line " +
                               std::to_string(lineno) + " in " + path);
    out.push_back(std::move(in));
  }
  return out;
}

std::vector<Interaction> k_core_filter(std::vector<Interaction> interactions, int k) {
  if (k < 1) throw std::invalid_argument("k_core_filter: k must be >= 1");
  for (;;) {
    std::unordered_map<std::string, int> user_count, item_count;
    for (const Interaction& in : interactions) {
      ++user_count[in.user];
      ++item_count[in.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(interactions.size());
    for (Interaction& in : interactions)
      if (user_count[in.user] >= k && item_count[in.item] >= k)
        kept.push_back(std::move(in));
    if (kept.size() == interactions.size()) return kept;
    interactions = std::move(kept);
  }
}

Dataset build_sequences(const std::vector<Interaction>& interactions) {
  Dataset ds;
  ds.item_ids.push_back("<pad>");
  std::unordered_map<std::string, int> item_index;
  std::unordered_map<std::string, int> user_index;
  // First-appearance order gives deterministic dense ids.
  std::vector<std::vector<Event>> per_user;
  for (const Interaction& in : interactions) {
    auto [uit, unew] = user_index.try_emplace(in.user, static_cast<int>(ds.user_ids.size()));
    if (unew) {
      ds.user_ids.push_back(in.user);
      per_user.emplace_back();
    }
    auto [iit, inew] = item_index.try_emplace(in.item, static_cast<int>(ds.item_ids.size()));
    if (inew) ds.item_ids.push_back(in.item);
    Event ev;
    ev.item = iit->second;
    ev.ts = in.ts;
    ev.triplet = cal::decompose_timestamp(in.ts);
    per_user[static_cast<std::size_t>(uit->second)].push_back(ev);
  }
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& events = per_user[u];
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.ts < b.ts; });
    if (events.size() < 3) {
      ++ds.dropped_short_users;
      continue;
    }
    UserSequence seq;
    seq.user_index = static_cast<int>(u);
    seq.events = std::move(events);
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

Split leave_one_out_split(const UserSequence& seq) {
  if (seq.events.size() < 3)
    throw std::invalid_argument("leave_one_out_split: sequence length < 3");
  Split split;
  split.train.assign(seq.events.begin(), seq.events.end() - 2);
  split.valid = seq.events[seq.events.size() - 2];
  split.test = seq.events.back();
  return split;
}

RowInput window(const std::vector<Event>& events, int max_len) {
  if (max_len < 1) throw std::invalid_argument("window: max_len must be >= 1");
  const std::size_t len = static_cast<std::size_t>(max_len);
  RowInput row;
  row.ids.assign(len, 0);
  row.triplets.assign(len, cal::TemporalTriplet{});
  row.raw_ts.assign(len, 0);
  const std::size_t n = std::min(events.size(), len);
  const std::size_t src_start = events.size() - n;
  const std::size_t dst_start = len - n;
  for (std::size_t i = 0; i < n; ++i) {
    const Event& ev = events[src_start + i];
    row.ids[dst_start + i] = ev.item;
    row.triplets[dst_start + i] = ev.triplet;
    row.raw_ts[dst_start + i] = ev.ts;
  }
  return row;
}

TrainRow make_train_row(const std::vector<Event>& train_events, int max_len) {
  if (train_events.size() < 2)
    throw std::invalid_argument("make_train_row: need at least 2 train events");
  std::vector<Event> inputs(train_events.begin(), train_events.end() - 1);
  TrainRow row;
  row.input = window(inputs, max_len);
  const std::size_t len = static_cast<std::size_t>(max_len);
  row.targets.assign(len, 0);
  row.active.assign(len, 0);
  const std::size_t n = std::min(inputs.size(), len);
  const std::size_t dst_start = len - n;
  const std::size_t src_start = inputs.size() - n;
  for (std::size_t i = 0; i < n; ++i) {
    row.targets[dst_start + i] = train_events[src_start + i + 1].item;
    row.active[dst_start + i] = 1;
  }
  return row;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

int synth_group_of_item(const SynthParams& params, int item) {
  const int group_size = params.n_items / 24;  // 12 groups over half the items
  if (group_size == 0) return -1;
  if (item < 12 * group_size) return item / group_size;
  return -1;
}

std::vector<Interaction> synth_seasonal(const SynthParams& params) {
  if (params.n_items < 24)
    throw std::invalid_argument("synth_seasonal: need at least 24 items");
  std::mt19937_64 rng(params.seed);
  const int group_size = params.n_items / 24;
  const int grouped = 12 * group_size;
  std::vector<Interaction> out;
  for (int u = 0; u < params.n_users; ++u) {
    const int n_events = uniform_int(rng, params.min_events, params.max_events);
    // Random start inside the horizon; gaps may run past it, which is fine.
    std::int64_t day = uniform_int(rng, 0, std::max(1, params.horizon_days / 2));
    std::vector<std::pair<int, std::int64_t>> history;  // (item, day)
    for (int e = 0; e < n_events; ++e) {
      const std::int64_t ts = day * 86400 + uniform_int(rng, 0, 86399);
      const int month = static_cast<int>(cal::decompose_timestamp(ts).m % 12);
      int item;
      const double r = uniform01(rng);
      if (r < params.p_season) {
        item = month * group_size + uniform_int(rng, 0, group_size - 1);
      } else if (r < params.p_season + params.p_recent && !history.empty() &&
                 day - history.back().second <= 7) {
        // Repeat something consumed within the last 7 days.
        std::vector<int> recent;
        for (const auto& [it, d] : history)
          if (day - d <= 7) recent.push_back(it);
        item = recent[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(recent.size()) - 1))];
      } else {
        item = grouped + uniform_int(rng, 0, params.n_items - grouped - 1);
      }
      out.push_back({"u" + std::to_string(u), "i" + std::to_string(item), ts});
      history.emplace_back(item, day);
      // Heavy-tailed gap: next-day half the time, else a 30-90 day jump, so
      // positional index carries little information about elapsed time.
      day += uniform01(rng) < 0.6 ? 1 : uniform_int(rng, 30, 90);
    }
  }
  return out;
}

void write_interactions_tsv(const std::vector<Interaction>& interactions,
                            const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_interactions_tsv: cannot open " + path);
  for (const Interaction& in : interactions)
    os << in.user << '\t' << in.item << '\t' << in.ts << '\n';
}

void write_generator_sidecar(const SynthParams& params, const std::string& path) {
  nlohmann::json j;
  j["n_users"] = params.n_users;
  j["n_items"] = params.n_items;
  j["horizon_days"] = params.horizon_days;
  j["p_season"] = params.p_season;
  j["p_recent"] = params.p_recent;
  j["min_events"] = params.min_events;
  j["max_events"] = params.max_events;
  j["seed"] = params.seed;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_generator_sidecar: cannot open " + path);
  os << j.dump(2) << '\n';
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir + "/items.tsv", std::ios::binary);
    for (std::size_t i = 0; i < ds.item_ids.size(); ++i)
      os << i << '\t' << ds.item_ids[i] << '\n';
  }
  {
    std::ofstream os(dir + "/users.tsv", std::ios::binary);
    for (std::size_t u = 0; u < ds.user_ids.size(); ++u)
      os << u << '\t' << ds.user_ids[u] << '\n';
  }
  {
    std::ofstream os(dir + "/sequences.tsv", std::ios::binary);
    for (const UserSequence& seq : ds.sequences) {
      os << seq.user_index;
      for (std::size_t i = 0; i < seq.events.size(); ++i)
        os << (i == 0 ? '\t' : ' ') << seq.events[i].item << ':' << seq.events[i].ts;
      os << '\n';
    }
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  {
    std::ifstream is(dir + "/items.tsv");
    if (!is) throw std::runtime_error("load_dataset: cannot open " + dir + "/items.tsv");
    std::string line;
    while (std::getline(is, line)) {
      const auto tab = line.find('\t');
      ds.item_ids.push_back(line.substr(tab + 1));
    }
  }
  {
    std::ifstream is(dir + "/users.tsv");
    if (!is) throw std::runtime_error("load_dataset: cannot open " + dir + "/users.tsv");
    std::string line;
    while (std::getline(is, line)) {
      const auto tab = line.find('\t');
      ds.user_ids.push_back(line.substr(tab + 1));
    }
  }
  {
    std::ifstream is(dir + "/sequences.tsv");
    if (!is) throw std::runtime_error("load_dataset: cannot open " + dir + "/sequences.tsv");
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      UserSequence seq;
      ls >> seq.user_index;
      std::string pair;
      while (ls >> pair) {
        const auto colon = pair.find(':');
        Event ev;
        ev.item = std::stoi(pair.substr(0, colon));
        ev.ts = std::stoll(pair.substr(colon + 1));
        ev.triplet = cal::decompose_timestamp(ev.ts);
        seq.events.push_back(ev);
      }
      ds.sequences.push_back(std::move(seq));
    }
  }
  return ds;
}

}  // namespace rote::data
