#pragma once

#include <string>

#include "raccredit/raccredit.hpp"

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

inline raccredit::SystemSpec load(const std::string& name) { return raccredit::load_system_spec(path(name)); }

// Three thermal units (100 MW FOR 0.10, 2 x 50 MW FOR 0.05), flat 149 MW load,
// a zero-rated candidate with FOR 0.10 and a zero-rated perfect unit.
inline raccredit::SystemSpec toy3() { return load("toy3.json"); }

inline raccredit::SystemSpec synergy() { return load("synergy.json"); }

}  // namespace fixtures
