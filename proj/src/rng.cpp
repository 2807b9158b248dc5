#include "cclc/rng.hpp"

#include <sstream>

#include "cclc/error.hpp"

namespace cclc {

std::string Rng::save_state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::restore_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) {
    throw value_error("Rng::restore_state: malformed engine state");
  }
}

}  // namespace cclc
