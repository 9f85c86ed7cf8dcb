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

#include "meltsim/scenario.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <system_error>

#include "meltsim/errors.h"
#include "meltsim/hexdump.h"
#include "meltsim/seed.h"

namespace meltsim {

const char* ExperimentName(Experiment e) {
  switch (e) {
    case Experiment::kDump:
      return "dump";
    case Experiment::kToy:
      return "toy";
    case Experiment::kKaslrSearch:
      return "kaslr-search";
    case Experiment::kMatrix:
      return "matrix";
    case Experiment::kBench:
      return "bench";
  }
  return "?";
}

std::optional<Experiment> ExperimentFromName(std::string_view name) {
  for (Experiment e : {Experiment::kDump, Experiment::kToy,
                       Experiment::kKaslrSearch, Experiment::kMatrix,
                       Experiment::kBench}) {
    if (name == ExperimentName(e)) return e;
  }
  return std::nullopt;
}

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value,
                           std::string_view expected) {
  throw ConfigError("bad value '" + std::string(value) + "' for key '" +
                    std::string(key) + "': expected " + std::string(expected));
}

// Decimal or 0x hex, '_' separators, optional K/M/G binary suffix.
std::uint64_t ParseU64(std::string_view key, std::string_view value) {
  std::string digits;
  for (char c : value) {
    if (c != '_') digits.push_back(c);
  }
  std::uint64_t scale = 1;
  if (!digits.empty()) {
    switch (std::toupper(static_cast<unsigned char>(digits.back()))) {
      case 'K':
        scale = 1ULL << 10;
        break;
      case 'M':
        scale = 1ULL << 20;
        break;
      case 'G':
        scale = 1ULL << 30;
        break;
      default:
        break;
    }
    if (scale != 1) digits.pop_back();
  }
  int base = 10;
  std::string_view d = digits;
  if (d.size() > 2 && d[0] == '0' && (d[1] == 'x' || d[1] == 'X')) {
    base = 16;
    d.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), v, base);
  if (d.empty() || ec != std::errc() || ptr != d.data() + d.size()) {
    BadValue(key, value, "an unsigned integer");
  }
  if (v > UINT64_MAX / scale) BadValue(key, value, "a value that fits 64 bits");
  return v * scale;
}

double ParseDouble(std::string_view key, std::string_view value) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    BadValue(key, value, "a number");
  }
  return v;
}

bool ParseBool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") {
    return true;
  }
  if (value == "off" || value == "false" || value == "0" || value == "no") {
    return false;
  }
  BadValue(key, value, "on/off");
}

std::uint32_t ParseU32(std::string_view key, std::string_view value) {
  const std::uint64_t v = ParseU64(key, value);
  if (v > UINT32_MAX) BadValue(key, value, "a 32-bit value");
  return static_cast<std::uint32_t>(v);
}

const char* OnOff(bool b) { return b ? "on" : "off"; }

std::string Fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string Hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Short text with recognisable secrets between filler, for hexdump demos.
using std::string_view_literals::operator""sv;
constexpr std::string_view kAsciiSample =
    "user=alice\0\0\0\0\0\0password=Dolphin18\0\0\0\0"
    "user=bob\0\0\0\0\0\0\0\0password=insta_0203\0\0\0"
    "token=secretpwd0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0"
    "https://example.org/addon?id=7f3a\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0"sv;

}  // namespace

LoadSpec ParseLoadSpec(std::string_view text) {
  const std::size_t at = text.rfind('@');
  if (at == std::string_view::npos || at == 0 || at + 1 == text.size()) {
    throw ConfigError("bad value '" + std::string(text) +
                      "' for key 'load': expected file@paddr");
  }
  return {std::filesystem::path(std::string(text.substr(0, at))),
          ParseU64("load", text.substr(at + 1))};
}

void Scenario::Set(std::string_view key, std::string_view value) {
  using Setter = std::function<void(Scenario&, std::string_view, std::string_view)>;
  static const std::map<std::string, Setter, std::less<>> kSetters = {
      {"seed", [](Scenario& s, auto k, auto v) { s.seed = ParseU64(k, v); }},
      {"experiment",
       [](Scenario& s, auto k, auto v) {
         const auto e = ExperimentFromName(v);
         if (!e) BadValue(k, v, "dump, toy, kaslr-search, matrix or bench");
         s.experiment = *e;
       }},
      {"vmem.phys_size",
       [](Scenario& s, auto k, auto v) { s.machine.vmem.phys_size = ParseU64(k, v); }},
      {"vmem.kaiser",
       [](Scenario& s, auto k, auto v) { s.machine.vmem.kaiser = ParseBool(k, v); }},
      {"vmem.kaslr",
       [](Scenario& s, auto k, auto v) { s.machine.vmem.kaslr = ParseBool(k, v); }},
      {"vmem.kaslr_entropy_bits",
       [](Scenario& s, auto k, auto v) {
         s.machine.vmem.kaslr_entropy_bits = static_cast<unsigned>(ParseU32(k, v));
       }},
      {"vmem.hard_split",
       [](Scenario& s, auto k, auto v) { s.machine.vmem.hard_split = ParseBool(k, v); }},
      {"vmem.seed", [](Scenario& s, auto k, auto v) { s.vmem_seed = ParseU64(k, v); }},
      {"cache.hit",
       [](Scenario& s, auto k, auto v) { s.machine.cache.hit_latency = ParseU32(k, v); }},
      {"cache.miss",
       [](Scenario& s, auto k, auto v) { s.machine.cache.miss_latency = ParseU32(k, v); }},
      {"cache.threshold",
       [](Scenario& s, auto k, auto v) { s.machine.cache.threshold = ParseU32(k, v); }},
      {"cache.noise",
       [](Scenario& s, auto k, auto v) { s.machine.cache.noise = ParseDouble(k, v); }},
      {"cache.capacity",
       [](Scenario& s, auto k, auto v) { s.machine.cache.capacity = ParseU64(k, v); }},
      {"cache.seed", [](Scenario& s, auto k, auto v) { s.cache_seed = ParseU64(k, v); }},
      {"window.W",
       [](Scenario& s, auto k, auto v) { s.attack.window.budget = ParseU64(k, v); }},
      {"window.p_zero",
       [](Scenario& s, auto k, auto v) { s.attack.window.p_zero = ParseDouble(k, v); }},
      {"window.seed", [](Scenario& s, auto k, auto v) { s.window_seed = ParseU64(k, v); }},
      {"cost.fault",
       [](Scenario& s, auto k, auto v) { s.machine.cost.fault = ParseU64(k, v); }},
      {"cost.abort",
       [](Scenario& s, auto k, auto v) { s.machine.cost.abort = ParseU64(k, v); }},
      {"cost.translate",
       [](Scenario& s, auto k, auto v) { s.machine.cost.translate = ParseU64(k, v); }},
      {"mode.serialized_check",
       [](Scenario& s, auto k, auto v) { s.machine.serialized_check = ParseBool(k, v); }},
      {"machine.transactions",
       [](Scenario& s, auto k, auto v) {
         s.machine.supports_transactions = ParseBool(k, v);
       }},
      {"machine.max_steps",
       [](Scenario& s, auto k, auto v) { s.machine.max_steps = ParseU64(k, v); }},
      {"attack.mode",
       [](Scenario& s, auto k, auto v) {
         if (v == "handling") {
           s.attack.mode = ExceptionMode::kHandling;
         } else if (v == "suppression") {
           s.attack.mode = ExceptionMode::kSuppression;
         } else {
           BadValue(k, v, "handling or suppression");
         }
       }},
      {"attack.bits_per_tx",
       [](Scenario& s, auto k, auto v) {
         const std::uint64_t bits = ParseU64(k, v);
         if (bits != 1 && bits != 8) BadValue(k, v, "1 or 8");
         s.attack.bits_per_tx = static_cast<int>(bits);
       }},
      {"attack.retry",
       [](Scenario& s, auto k, auto v) { s.attack.retry = ParseBool(k, v); }},
      {"attack.max_retries",
       [](Scenario& s, auto k, auto v) {
         s.attack.max_retries = static_cast<int>(std::min<std::uint64_t>(
             ParseU64(k, v), 1'000'000));
       }},
      {"plant.source",
       [](Scenario& s, auto k, auto v) {
         if (v == "random") {
           s.plant = PlantSource::kRandom;
         } else if (v == "ascii") {
           s.plant = PlantSource::kAscii;
         } else if (v == "zero") {
           s.plant = PlantSource::kZero;
         } else if (v == "none") {
           s.plant = PlantSource::kNone;
         } else {
           BadValue(k, v, "random, ascii, zero or none");
         }
       }},
      {"plant.paddr", [](Scenario& s, auto k, auto v) { s.plant_paddr = ParseU64(k, v); }},
      {"plant.len", [](Scenario& s, auto k, auto v) { s.plant_len = ParseU64(k, v); }},
      {"plant.seed", [](Scenario& s, auto k, auto v) { s.plant_seed = ParseU64(k, v); }},
      {"load",
       [](Scenario& s, auto, auto v) { s.loads.push_back(ParseLoadSpec(v)); }},
      {"dump.paddr", [](Scenario& s, auto k, auto v) { s.dump_paddr = ParseU64(k, v); }},
      {"dump.len", [](Scenario& s, auto k, auto v) { s.dump_len = ParseU64(k, v); }},
      {"toy.data",
       [](Scenario& s, auto k, auto v) {
         const std::uint64_t d = ParseU64(k, v);
         if (d > 255) BadValue(k, v, "a byte");
         s.toy_data = static_cast<std::uint8_t>(d);
       }},
      {"toy.csv",
       [](Scenario& s, auto, auto v) { s.toy_csv = std::filesystem::path(std::string(v)); }},
      {"kaslr.trials",
       [](Scenario& s, auto k, auto v) { s.kaslr_trials = ParseU64(k, v); }},
      {"out",
       [](Scenario& s, auto, auto v) { s.out = std::filesystem::path(std::string(v)); }},
  };
  const auto it = kSetters.find(key);
  if (it == kSetters.end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  it->second(*this, key, value);
}

MachineConfig Scenario::ResolvedMachine() const {
  MachineConfig m = machine;
  m.vmem.seed = vmem_seed.value_or(DeriveSeed(seed, 1));
  m.cache.seed = cache_seed.value_or(DeriveSeed(seed, 2));
  m.cache.Validate();
  return m;
}

AttackConfig Scenario::ResolvedAttack() const {
  AttackConfig a = attack;
  a.window.seed = window_seed.value_or(DeriveSeed(seed, 3));
  a.Validate();
  return a;
}

Scenario ParseScenario(std::string_view text) {
  Scenario s;
  int line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value, got '" + std::string(line) + "'");
    }
    s.Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return s;
}

Scenario LoadScenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read scenario '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return ParseScenario(text.str());
}

std::vector<Plant> PlannedPlants(const Scenario& s) {
  std::vector<Plant> plants;
  if (s.plant != PlantSource::kNone && s.plant_len > 0) {
    Plant p{s.plant_paddr, std::vector<std::uint8_t>(s.plant_len)};
    switch (s.plant) {
      case PlantSource::kRandom: {
        std::mt19937_64 rng(s.plant_seed.value_or(DeriveSeed(s.seed, 4)));
        for (auto& b : p.bytes) b = static_cast<std::uint8_t>(rng());
        break;
      }
      case PlantSource::kAscii:
        for (std::size_t i = 0; i < p.bytes.size(); ++i) {
          p.bytes[i] = static_cast<std::uint8_t>(kAsciiSample[i % kAsciiSample.size()]);
        }
        break;
      case PlantSource::kZero:
      case PlantSource::kNone:
        break;
    }
    plants.push_back(std::move(p));
  }
  for (const LoadSpec& l : s.loads) {
    std::ifstream in(l.file, std::ios::binary);
    if (!in) throw IoError("cannot read load file '" + l.file.string() + "'");
    plants.push_back({l.paddr, std::vector<std::uint8_t>(
                                   std::istreambuf_iterator<char>(in), {})});
  }
  return plants;
}

MachineState BuildScenarioMachine(const Scenario& s, const MachineConfig& cfg) {
  MachineState m = BuildMachine(cfg);
  for (const Plant& p : PlannedPlants(s)) m.memory.Plant(PhysAddr{p.paddr}, p.bytes);
  return m;
}

namespace {

struct DumpRangeSpec {
  std::uint64_t paddr;
  std::uint64_t len;
};

DumpRangeSpec DumpRangeOf(const Scenario& s) {
  std::uint64_t paddr = s.plant_paddr;
  std::uint64_t len = s.plant_len;
  if (s.plant == PlantSource::kNone && !s.loads.empty()) {
    paddr = s.loads.front().paddr;
  }
  if (s.dump_paddr) paddr = *s.dump_paddr;
  if (s.dump_len) len = *s.dump_len;
  if (len == 0) throw ConfigError("dump.len must be at least 1");
  return {paddr, len};
}

// Planted bytes covering the whole range, or nothing.
std::optional<std::vector<std::uint8_t>> OracleFor(const MachineState& m,
                                                   DumpRangeSpec r) {
  std::vector<bool> covered(r.len, false);
  for (const auto& p : m.memory.planted()) {
    const std::uint64_t lo = std::max(p.start.value, r.paddr);
    const std::uint64_t hi = std::min(p.start.value + p.bytes.size(), r.paddr + r.len);
    for (std::uint64_t a = lo; a < hi; ++a) covered[a - r.paddr] = true;
  }
  if (!std::all_of(covered.begin(), covered.end(), [](bool b) { return b; })) {
    return std::nullopt;
  }
  return m.memory.Read(PhysAddr{r.paddr}, r.len);
}

bool AnyCountermeasure(const MachineConfig& m) {
  return m.vmem.kaiser || m.vmem.hard_split || m.serialized_check;
}

struct DumpRun {
  AttackResult result;
  std::uint64_t va = 0;
};

DumpRun RunDump(const Scenario& s, const MachineConfig& mc, const AttackConfig& ac) {
  MachineState m = BuildScenarioMachine(s, mc);
  const DumpRangeSpec r = DumpRangeOf(s);
  if (r.paddr + r.len > mc.vmem.phys_size || r.paddr + r.len < r.paddr) {
    throw ConfigError("dump range leaves physical memory");
  }
  const auto oracle = OracleFor(m, r);
  DumpRun run;
  run.va = (m.asp.direct_map_base() + r.paddr).value;
  Attacker attacker(m, ac);
  std::optional<std::span<const std::uint8_t>> oracle_span;
  if (oracle) oracle_span = std::span<const std::uint8_t>(*oracle);
  run.result = attacker.DumpRange(VirtAddr{run.va}, r.len, oracle_span);
  return run;
}

void RunDumpExperiment(const Scenario& s, Report& rep) {
  const DumpRun run = RunDump(s, rep.machine, rep.attack);
  rep.dump_va = run.va;
  rep.dump = run.result;
  const auto values = run.result.values();
  rep.hexdump = FormatHexdump(values, VirtAddr{run.va});
  if (AnyCountermeasure(rep.machine) && run.result.hits > 0) {
    rep.failures.push_back(std::to_string(run.result.hits) +
                           " byte(s) leaked with a countermeasure enabled");
  }
}

void RunToyExperiment(const Scenario& s, Report& rep) {
  MachineState m = BuildScenarioMachine(s, rep.machine);
  rep.latencies = ToyExample(s.toy_data, m, rep.attack.window);
}

void RunKaslrExperiment(const Scenario& s, Report& rep) {
  rep.machine.vmem.kaslr = true;
  const MachineConfig mc = rep.machine;
  rep.kaslr_candidates = KaslrCandidateCount(mc.vmem.phys_size, mc.vmem.kaslr_entropy_bits);
  for (std::uint64_t t = 0; t < s.kaslr_trials; ++t) {
    MachineConfig trial = mc;
    trial.vmem.seed = DeriveSeed(rep.machine.vmem.seed, t);
    AttackConfig ac = rep.attack;
    ac.window.seed = DeriveSeed(rep.attack.window.seed, t);
    MachineState m = BuildScenarioMachine(s, trial);
    const KaslrSearchResult r = FindDirectMap(ac, m, mc.vmem.phys_size);
    if (r.base && *r.base != m.asp.direct_map_base()) {
      rep.failures.push_back("trial " + std::to_string(t) +
                             ": search returned a wrong base");
    }
    if (AnyCountermeasure(mc) && r.base) {
      rep.failures.push_back("trial " + std::to_string(t) +
                             ": direct map found with a countermeasure enabled");
    }
    if (!AnyCountermeasure(mc) && !r.base) {
      rep.failures.push_back("trial " + std::to_string(t) + ": direct map not found");
    }
    rep.kaslr.push_back(r);
  }
}

void RunMatrixExperiment(const Scenario& s, Report& rep) {
  struct Cell {
    const char* name;
    bool kaiser, serialized, hard_split;
  };
  static constexpr Cell kCells[] = {
      {"off", false, false, false},
      {"kaiser", true, false, false},
      {"serialized-check", false, true, false},
      {"hard-split", false, false, true},
  };
  std::vector<std::future<MatrixRow>> cells;
  for (const Cell& c : kCells) {
    MachineConfig mc = rep.machine;
    mc.vmem.kaiser = c.kaiser;
    mc.serialized_check = c.serialized;
    mc.vmem.hard_split = c.hard_split;
    cells.push_back(std::async(std::launch::async, [&s, mc, ac = rep.attack, c] {
      const DumpRun run = RunDump(s, mc, ac);
      MatrixRow row;
      row.name = c.name;
      row.hits = run.result.hits;
      row.unknown = run.result.unknown;
      row.accuracy = run.result.accuracy();
      return row;
    }));
  }
  for (auto& f : cells) rep.matrix.push_back(f.get());
  for (const MatrixRow& row : rep.matrix) {
    if (row.name == "off") {
      if (row.accuracy < 0.99) {
        rep.failures.push_back("baseline recovered only " +
                               Fixed(100.0 * row.accuracy) + "% of the bytes");
      }
    } else if (row.hits > 0) {
      rep.failures.push_back(row.name + ": " + std::to_string(row.hits) +
                             " byte(s) leaked");
    }
  }
}

void RunBenchExperiment(const Scenario& s, Report& rep) {
  AttackConfig handling = rep.attack;
  handling.mode = ExceptionMode::kHandling;
  AttackConfig suppression = rep.attack;
  suppression.mode = ExceptionMode::kSuppression;
  rep.handling_cpb = RunDump(s, rep.machine, handling).result.cycles_per_byte;
  rep.suppression_cpb = RunDump(s, rep.machine, suppression).result.cycles_per_byte;
  if (!(*rep.suppression_cpb < *rep.handling_cpb)) {
    rep.failures.push_back("suppression is not faster than handling");
  }
}

}  // namespace

Report RunScenario(const Scenario& s) {
  Report rep;
  rep.experiment = s.experiment;
  rep.machine = s.ResolvedMachine();
  rep.attack = s.ResolvedAttack();
  switch (s.experiment) {
    case Experiment::kDump:
      RunDumpExperiment(s, rep);
      break;
    case Experiment::kToy:
      RunToyExperiment(s, rep);
      break;
    case Experiment::kKaslrSearch:
      RunKaslrExperiment(s, rep);
      break;
    case Experiment::kMatrix:
      RunMatrixExperiment(s, rep);
      break;
    case Experiment::kBench:
      RunBenchExperiment(s, rep);
      break;
  }
  return rep;
}

double MedianProbes(const std::vector<KaslrSearchResult>& trials) {
  std::vector<std::uint64_t> probes;
  for (const auto& t : trials) {
    if (t.base) probes.push_back(t.probes);
  }
  if (probes.empty()) return 0.0;
  std::sort(probes.begin(), probes.end());
  const std::size_t n = probes.size();
  if (n % 2) return static_cast<double>(probes[n / 2]);
  return (static_cast<double>(probes[n / 2 - 1]) + static_cast<double>(probes[n / 2])) / 2.0;
}

std::string Report::Render() const {
  std::ostringstream out;
  out << "experiment: " << ExperimentName(experiment) << '\n';
  out << "countermeasures: kaiser=" << OnOff(machine.vmem.kaiser)
      << " serialized_check=" << OnOff(machine.serialized_check)
      << " hard_split=" << OnOff(machine.vmem.hard_split)
      << " kaslr=" << OnOff(machine.vmem.kaslr) << '\n';
  out << "attack: mode=" << ExceptionModeName(attack.mode)
      << " bits_per_tx=" << attack.bits_per_tx << " retry=" << OnOff(attack.retry)
      << " max_retries=" << attack.max_retries << '\n';
  out << "window: W=" << attack.window.budget
      << " p_zero=" << Fixed(attack.window.p_zero, 3) << '\n';

  if (dump) {
    out << "range: " << Hex(dump_va) << " +" << dump->bytes.size() << '\n';
    out << "hits: " << dump->hits << '\n';
    out << "unknown: " << dump->unknown << '\n';
    if (dump->errors) {
      out << "accuracy: " << Fixed(100.0 * dump->accuracy()) << "%\n";
    } else {
      out << "accuracy: n/a\n";
    }
    out << "cycles: " << dump->cycles << '\n';
    out << "cycles_per_byte: " << Fixed(dump->cycles_per_byte) << '\n';
  }
  if (latencies) {
    std::string dips;
    for (std::size_t i = 0; i < latencies->size(); ++i) {
      if ((*latencies)[i] < machine.cache.threshold) {
        dips += (dips.empty() ? "" : " ") + std::to_string(i);
      }
    }
    out << "threshold: " << machine.cache.threshold << '\n';
    out << "hits: " << (dips.empty() ? "none" : dips) << '\n';
  }
  if (!kaslr.empty()) {
    std::size_t found = 0;
    std::uint64_t worst = 0;
    for (const auto& t : kaslr) {
      if (t.base) {
        ++found;
        worst = std::max(worst, t.probes);
      }
    }
    out << "trials: " << kaslr.size() << '\n';
    out << "found: " << found << '\n';
    out << "candidates: " << kaslr_candidates << '\n';
    out << "median_probes: " << Fixed(MedianProbes(kaslr), 1) << '\n';
    out << "max_probes: " << worst << '\n';
  }
  if (!matrix.empty()) {
    out << "cell,hits,unknown,accuracy\n";
    for (const MatrixRow& r : matrix) {
      out << r.name << ',' << r.hits << ',' << r.unknown << ','
          << Fixed(100.0 * r.accuracy) << "%\n";
    }
  }
  if (handling_cpb && suppression_cpb) {
    out << "cycles_per_byte.handling: " << Fixed(*handling_cpb) << '\n';
    out << "cycles_per_byte.suppression: " << Fixed(*suppression_cpb) << '\n';
  }
  out << "status: " << (failures.empty() ? "ok" : "FAILED") << '\n';
  for (const std::string& f : failures) out << "failure: " << f << '\n';

  if (!kaslr.empty()) {
    out << "\ntrial,base,probes\n";
    for (std::size_t i = 0; i < kaslr.size(); ++i) {
      out << i << ',' << (kaslr[i].base ? Hex(kaslr[i].base->value) : "none")
          << ',' << kaslr[i].probes << '\n';
    }
  }
  if (latencies) out << '\n' << LatencyCsv(*latencies);
  if (!hexdump.empty()) out << '\n' << hexdump;
  return out.str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto '" + path.string() + "'");
  }
}

Report RunScenarioFile(const std::filesystem::path& path) {
  const Scenario s = LoadScenario(path);
  Report rep = RunScenario(s);
  if (s.out) WriteFileAtomic(*s.out, rep.Render());
  if (s.toy_csv && rep.latencies) WriteFileAtomic(*s.toy_csv, LatencyCsv(*rep.latencies));
  return rep;
}

}  // namespace meltsim
