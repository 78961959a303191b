#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rote/backbone.hpp"
#include "rote/calendar.hpp"

namespace rote::data {

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t ts = 0;
};

struct Event {
  int item = 0;  // dense index, >= 1
  cal::TemporalTriplet triplet;
  std::int64_t ts = 0;
};

struct UserSequence {
  int user_index = 0;
  std::vector<Event> events;  // sorted by ts, stable on ties
};

struct Dataset {
  std::vector<UserSequence> sequences;
  std::vector<std::string> user_ids;  // user_index -> raw id
  std::vector<std::string> item_ids;  // item index -> raw id; [0] = "<pad>"
  std::size_t dropped_short_users = 0;

  int vocab_size() const { return static_cast<int>(item_ids.size()); }
};

// TSV lines `user<TAB>item<TAB>unix_seconds`; '#' starts a comment line.
std::vector<Interaction> load_interactions(const std::string& path);

// Iteratively drops users/items with < k interactions until a fixpoint.
std::vector<Interaction> k_core_filter(std::vector<Interaction> interactions, int k = 5);

// Dense reindexing (items from 1, 0 = padding), per-user stable time sort,
// triplets from decompose_timestamp. Users with < 3 events are dropped.
Dataset build_sequences(const std::vector<Interaction>& interactions);

struct Split {
  std::vector<Event> train;  // all but the last two events
  Event valid;
  Event test;
};

Split leave_one_out_split(const UserSequence& seq);

// Most recent max_len events, left-padded with id 0 / triplet (0,0,0).
RowInput window(const std::vector<Event>& events, int max_len);

// Training row: inputs are events[0..n-2], targets the next event's item,
// both windowed to max_len. active marks positions with a real target.
struct TrainRow {
  RowInput input;
  std::vector<int> targets;
  std::vector<std::uint8_t> active;
};

TrainRow make_train_row(const std::vector<Event>& train_events, int max_len);

struct SynthParams {
  int n_users = 2000;
  int n_items = 600;
  int horizon_days = 1460;
  double p_season = 0.6;
  double p_recent = 0.2;
  int min_events = 12;
  int max_events = 40;
  std::uint64_t seed = 1;
};

// Seasonal synthetic log: half the items form 12 month-affinity groups, the
// rest are an ungrouped tail. Gaps mix 1-day and 30-90-day jumps so position
// and elapsed time decouple. Deterministic per seed.
std::vector<Interaction> synth_seasonal(const SynthParams& params);

// Month-affinity group of an item index (0-based raw id), or -1 for tail.
int synth_group_of_item(const SynthParams& params, int item);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);
void write_interactions_tsv(const std::vector<Interaction>& interactions,
                            const std::string& path);
void write_generator_sidecar(const SynthParams& params, const std::string& path);

}  // namespace rote::data
