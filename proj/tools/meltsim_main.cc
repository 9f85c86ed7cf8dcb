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

// meltsim: run Meltdown experiments against the simulated machine.
//
//   meltsim [--config F] [--seed N] [--load file@paddr]... [--set k=v]...
//           [--out F] <run|dump|toy|kaslr-search|matrix|bench>
//
// Exit codes: 0 ok, 1 config error, 2 I/O error, 3 the experiment's
// expectation failed (leak under a countermeasure, bench ordering, ...).

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meltsim/errors.h"
#include "meltsim/hexdump.h"
#include "meltsim/scenario.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitAssertion = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meltdown on a simulated out-of-order core"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> loads;
  std::vector<std::string> sets;
  std::string out_path;
  app.add_option("--config", config_path, "scenario file (key=value)");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--load", loads, "plant a file at a physical address: file@paddr");
  app.add_option("--set", sets, "override a scenario key: key=value");
  app.add_option("--out", out_path, "write the report here (atomically)");

  auto* run = app.add_subcommand("run", "run the experiment named in the config");
  auto* dump = app.add_subcommand("dump", "dump planted memory through the side channel");
  std::optional<std::uint64_t> dump_len;
  dump->add_option("--len", dump_len, "bytes to dump");
  auto* toy = app.add_subcommand("toy", "transient probe access after RAISE");
  std::optional<unsigned> toy_data;
  std::string csv_path;
  toy->add_option("--data", toy_data, "byte value to encode")->check(CLI::Range(0, 255));
  toy->add_option("--csv", csv_path, "write page,cycles CSV here");
  auto* kaslr = app.add_subcommand("kaslr-search", "locate the randomized direct map");
  std::optional<std::uint64_t> trials;
  kaslr->add_option("--trials", trials, "randomizations to search");
  auto* matrix = app.add_subcommand("matrix", "same dump under each countermeasure");
  auto* bench = app.add_subcommand("bench", "cycles/byte, handling vs. suppression");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    meltsim::Scenario s;
    if (!config_path.empty()) s = meltsim::LoadScenario(config_path);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw meltsim::ConfigError("--set expects key=value, got '" + kv + "'");
      }
      s.Set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) s.seed = *seed;
    for (const std::string& l : loads) s.loads.push_back(meltsim::ParseLoadSpec(l));
    if (!out_path.empty()) s.out = out_path;

    using meltsim::Experiment;
    if (*dump) s.experiment = Experiment::kDump;
    if (*toy) s.experiment = Experiment::kToy;
    if (*kaslr) s.experiment = Experiment::kKaslrSearch;
    if (*matrix) s.experiment = Experiment::kMatrix;
    if (*bench) s.experiment = Experiment::kBench;
    (void)run;
    if (dump_len) s.dump_len = *dump_len;
    if (toy_data) s.toy_data = static_cast<std::uint8_t>(*toy_data);
    if (!csv_path.empty()) s.toy_csv = csv_path;
    if (trials) s.kaslr_trials = *trials;

    const meltsim::Report report = meltsim::RunScenario(s);
    const std::string text = report.Render();
    if (s.out) {
      meltsim::WriteFileAtomic(*s.out, text);
    } else {
      std::cout << text;
    }
    if (s.toy_csv && report.latencies) {
      meltsim::WriteFileAtomic(*s.toy_csv, meltsim::LatencyCsv(*report.latencies));
    }
    if (!report.failures.empty()) {
      for (const auto& f : report.failures) std::cerr << "meltsim: " << f << '\n';
      return kExitAssertion;
    }
    return kExitOk;
  } catch (const meltsim::IoError& e) {
    std::cerr << "meltsim: " << e.what() << '\n';
    return kExitIo;
  } catch (const meltsim::Error& e) {
    std::cerr << "meltsim: " << e.what() << '\n';
    return kExitConfig;
  }
}
