#ifndef BLL_COMMON_HPP
#define BLL_COMMON_HPP

#include <stdexcept>
#include <string>

namespace bll {

// Thrown when an argument is outside an operation's documented domain.
class domain_error : public std::runtime_error {
 public:
  explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a solver or evaluator cannot meet its contract
// (decay violation, CFL rejection, NaN state, parameter out of range).
class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw domain_error(msg);
}

}  // namespace bll

#endif
