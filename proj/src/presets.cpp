#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "ksl/errors.hpp"
#include "ksl/scenario.hpp"

namespace ksl {

namespace {

struct Preset {
  const char* name;
  const char* description;
  const char* config;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"subcritical-4pi", "Gaussian of mass 4pi spreads; radial oracle, Lambda' and localization checks",
       R"([grid]
box_length = 32
n = 256
backend = free-space

[initial]
kind = gaussian
mass = 4pi
width = 1

[run]
t_end = 2
record_every = 0.05
blowup_cap = 1e4
expect = completed

[probes]
centers = 0 0; 1.5 0
radii = 2

[checks]
mass_drift = 1e-6
envelope = true
localization = true
radial = true
)"},
      {"moment-fd-4pi", "Gaussian of mass 4pi at dx = 1/16; Lambda' formula against finite differences, localization checks",
       R"([grid]
box_length = 16
n = 256
backend = free-space

[initial]
kind = gaussian
mass = 4pi
width = 1

[run]
t_end = 1
record_every = 0.05
blowup_cap = 1e4
expect = completed

[probes]
centers = 0 0; 1.5 0; 0.5 0.5
radii = 2, 2, 1

[checks]
mass_drift = 1e-6
envelope = true
localization = true
moment_fd = 0.01
)"},
      {"critical-8pi", "Gaussian of mass exactly 8pi; exists over the horizon while the core sharpens",
       R"([grid]
box_length = 32
n = 256
backend = free-space

[initial]
kind = gaussian
mass = 8pi
width = 1

[run]
t_end = 2
record_every = 0.1
blowup_cap = 1e4
expect = completed

[probes]
centers = 0 0
radii = 2

[checks]
mass_drift = 1e-6
envelope = true
)"},
      {"supercritical-12pi", "Gaussian of mass 12pi blows up; detection time against the radial oracle",
       R"([grid]
box_length = 16
n = 256
backend = free-space

[initial]
kind = gaussian
mass = 12pi
width = 1

[run]
t_end = 2
record_every = 0.05
blowup_cap = 120
expect = blowup

[probes]
centers = 0 0
radii = 1

[checks]
mass_drift = 1e-6
envelope = true
radial = true
radial_time = 0.1
)"},
      {"two-atoms-6pi", "Atoms 6pi + 6pi at distance 3 (delta = 0.1): every unit ball below 8pi, total above",
       R"([grid]
box_length = 16
n = 256
backend = free-space

[initial]
kind = atoms
masses = 6pi, 6pi
centers = -1.5 0; 1.5 0
delta = 0.1

[run]
t_end = 2
record_every = 0.05
blowup_cap = 200
expect = blowup

[probes]
centers = -1.5 0; 1.5 0; 0 0
radii = 1, 1, 1.5

[checks]
mass_drift = 1e-6
envelope = true
sliding_below = 8pi
sliding_radius = 1
exists_beyond = 0.5
)"},
      {"mollify-sweep-7pi", "Atom of mass 7pi mollified at delta = 0.4 ... 0.05; uniform t^{1/4}||u||_{4/3} bound",
       R"([grid]
box_length = 16
n = 256
backend = free-space

[initial]
kind = atoms
masses = 7pi
centers = 0 0
delta = 0.4

[run]
t_end = 0.5
record_every = 0.01
extra_record_times = 0.0005, 0.001, 0.002, 0.005
blowup_cap = 1e4
expect = completed

[probes]
centers = 0 0
radii = 1

[sweep]
axis = delta
values = 0.4, 0.2, 0.1, 0.05

[checks]
mass_drift = 1e-6
envelope = true
hyper_factor = 2
hyper_p = 4/3
min_peak_spread = 8
)"},
      {"scaling-pair", "lambda = 2 rescaling: L1 agreement at matched times and blow-up times scaling as lambda^-2",
       R"([grid]
box_length = 16
n = 128
backend = free-space

[initial]
kind = gaussian
mass = 4pi
width = 1

[run]
mode = scaling
t_end = 0.5
blowup_cap = 120
compare_times = 0.125, 0.25
blowup_mass = 12pi

[sweep]
axis = lambda
values = 2

[checks]
scaling_l1 = 0.01
scaling_time = 0.05
)"},
      {"picard-vs-stepper", "Picard iteration of the mild formulation against the time stepper; non-contraction near blow-up",
       R"([grid]
box_length = 16
n = 128
backend = free-space

[initial]
kind = gaussian
mass = pi
width = 1

[run]
mode = picard
t_end = 0.1
blowup_cap = 1e4
picard_iterations = 30
picard_nodes = 12
near_blowup_mass = 12pi
near_blowup_time = 0.6

[checks]
picard_ratio = 0.5
picard_agreement = 0.01
)"},
  };
  return all;
}

}  // namespace

std::vector<PresetInfo> preset_list() {
  std::vector<PresetInfo> out;
  for (const auto& p : presets()) out.push_back({p.name, p.description});
  return out;
}

std::string preset_config(std::string_view name) {
  for (const auto& p : presets())
    if (name == p.name) {
      std::string text = p.config;
      const auto at = text.find("[run]\n") + 6;
      text.insert(at, std::string("name = ") + p.name + "\ndescription = " + p.description + "\n");
      return text;
    }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace ksl
