// Copyright 2026 The meltsim Authors
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

// Scenario files and the experiment runner behind the CLI.
//
// A scenario is flat key=value text; '#' starts a comment. Keys:
//
//   seed                  base seed; sub-seeds are derived from it unless set
//   experiment            dump | toy | kaslr-search | matrix | bench
//   vmem.phys_size        bytes, K/M/G suffixes accepted
//   vmem.kaiser, vmem.kaslr, vmem.kaslr_entropy_bits, vmem.hard_split,
//   vmem.seed
//   cache.hit, cache.miss, cache.threshold, cache.noise, cache.capacity,
//   cache.seed
//   window.W, window.p_zero, window.seed
//   cost.fault, cost.abort, cost.translate
//   mode.serialized_check
//   machine.transactions, machine.max_steps
//   attack.mode           handling | suppression
//   attack.bits_per_tx, attack.retry, attack.max_retries
//   plant.source          random | ascii | zero | none
//   plant.paddr, plant.len, plant.seed
//   load                  file@paddr, may repeat
//   dump.paddr, dump.len  physical range read through the direct map;
//                         default to the planted range
//   toy.data, toy.csv
//   kaslr.trials
//   out                   report path

#ifndef MELTSIM_SCENARIO_H_
#define MELTSIM_SCENARIO_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "meltsim/attack.h"
#include "meltsim/machine.h"

namespace meltsim {

enum class Experiment { kDump, kToy, kKaslrSearch, kMatrix, kBench };

const char* ExperimentName(Experiment e);
std::optional<Experiment> ExperimentFromName(std::string_view name);

enum class PlantSource { kRandom, kAscii, kZero, kNone };

struct LoadSpec {
  std::filesystem::path file;
  std::uint64_t paddr = 0;
};

// Parses "file@paddr". Throws ConfigError.
LoadSpec ParseLoadSpec(std::string_view text);

struct Scenario {
  std::uint64_t seed = 1;
  Experiment experiment = Experiment::kDump;
  MachineConfig machine;
  AttackConfig attack;

  PlantSource plant = PlantSource::kRandom;
  std::uint64_t plant_paddr = 0x10'0000;
  std::uint64_t plant_len = 4096;
  std::vector<LoadSpec> loads;

  std::optional<std::uint64_t> dump_paddr;
  std::optional<std::uint64_t> dump_len;

  std::uint8_t toy_data = 84;
  std::optional<std::filesystem::path> toy_csv;
  std::uint64_t kaslr_trials = 1;
  std::optional<std::filesystem::path> out;

  // Seeds set explicitly; the rest derive from seed.
  std::optional<std::uint64_t> vmem_seed, cache_seed, window_seed, plant_seed;

  // Applies one key. Throws ConfigError naming the key when it is unknown or
  // its value does not parse.
  void Set(std::string_view key, std::string_view value);

  // Machine and attack config with derived seeds filled in.
  MachineConfig ResolvedMachine() const;
  AttackConfig ResolvedAttack() const;
};

// Throws ConfigError with the line number on malformed input.
Scenario ParseScenario(std::string_view text);
// Throws IoError if the file cannot be read.
Scenario LoadScenario(const std::filesystem::path& path);

// The bytes a scenario plants, in planting order.
struct Plant {
  std::uint64_t paddr;
  std::vector<std::uint8_t> bytes;
};
std::vector<Plant> PlannedPlants(const Scenario& s);

// Machine with the scenario's plants written into physical memory.
MachineState BuildScenarioMachine(const Scenario& s, const MachineConfig& cfg);

struct MatrixRow {
  std::string name;
  std::size_t hits = 0;
  std::size_t unknown = 0;
  double accuracy = 0.0;
};

struct Report {
  Experiment experiment = Experiment::kDump;
  MachineConfig machine;
  AttackConfig attack;

  // dump
  std::optional<AttackResult> dump;
  std::uint64_t dump_va = 0;
  std::string hexdump;
  // toy
  std::optional<std::array<std::uint32_t, kProbePages>> latencies;
  // kaslr-search
  std::vector<KaslrSearchResult> kaslr;
  std::uint64_t kaslr_candidates = 0;
  // matrix
  std::vector<MatrixRow> matrix;
  // bench
  std::optional<double> handling_cpb, suppression_cpb;

  // Set when the experiment's expectation does not hold (a leak under a
  // countermeasure, bench ordering violated, ...).
  std::vector<std::string> failures;

  std::string Render() const;
};

Report RunScenario(const Scenario& s);

// Parses path, runs it and writes the report to s.out when set.
Report RunScenarioFile(const std::filesystem::path& path);

// Writes to a temporary file next to path, then renames it over path.
// Throws IoError.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view data);

// Median of the probe counts of the successful trials; 0 if none.
double MedianProbes(const std::vector<KaslrSearchResult>& trials);

}  // namespace meltsim

#endif  // MELTSIM_SCENARIO_H_
