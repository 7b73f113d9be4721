#pragma once

#include <stdexcept>
#include <string>

namespace bitour {

// Error taxonomy shared by the whole library.
//
// invalid_argument    caller handed in something malformed
// hypothesis_unmet    a lemma-style precondition fails on this instance; an
//                     expected, meaningful outcome at small scale (exit 3)
// invariant_violation a conclusion that should be forced by construction
//                     failed its recount; a bug, never patched over (exit 4)
// size_limit          instance exceeds a configured search cap

struct invalid_argument : std::runtime_error {
    explicit invalid_argument(const std::string& m) : std::runtime_error(m) {}
};

struct hypothesis_unmet : std::runtime_error {
    explicit hypothesis_unmet(const std::string& m) : std::runtime_error(m) {}
};

struct invariant_violation : std::runtime_error {
    explicit invariant_violation(const std::string& m) : std::runtime_error(m) {}
};

struct size_limit : std::runtime_error {
    explicit size_limit(const std::string& m) : std::runtime_error(m) {}
};

inline void require_arg(bool ok, const std::string& m) {
    if (!ok) throw invalid_argument(m);
}

inline void require_hypothesis(bool ok, const std::string& m) {
    if (!ok) throw hypothesis_unmet(m);
}

inline void ensure(bool ok, const std::string& m) {
    if (!ok) throw invariant_violation(m);
}

}  // namespace bitour
