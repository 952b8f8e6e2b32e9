#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace ifm {

// Test objects: a perfect absorber, or a perfectly transmitting object that
// induces no phase shift.
enum class ObjectKind { Black, Transparent };

// Classification bins for a single test: detected at exit 1, detected at
// exit 2, or absorbed in the object.
enum class Group { I = 0, II = 1, III = 2 };

inline const char* to_string(ObjectKind k) {
    return k == ObjectKind::Black ? "black" : "transparent";
}

inline const char* to_string(Group g) {
    switch (g) {
        case Group::I: return "i";
        case Group::II: return "ii";
        default: return "iii";
    }
}

// A measured or derived quantity with a one-standard-deviation uncertainty.
struct ValueSigma {
    double value = 0.0;
    double sigma = 0.0;
};

// Per-object-type probabilities of the three outcomes. p_iii is absent for
// transparent objects (they are never absorbed).
struct OutcomeProbabilities {
    ValueSigma p_i;
    ValueSigma p_ii;
    std::optional<ValueSigma> p_iii;
    ObjectKind object = ObjectKind::Black;
};

// The two probability rows driving classification, enrichment and simulation.
struct OutcomeTable {
    OutcomeProbabilities black;
    OutcomeProbabilities transparent;
};

class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class DegenerateDataError : public std::runtime_error {
  public:
    explicit DegenerateDataError(const std::string& what) : std::runtime_error(what) {}
};

class InconsistentExposureError : public std::runtime_error {
  public:
    explicit InconsistentExposureError(const std::string& what) : std::runtime_error(what) {}
};

class DivergenceError : public std::runtime_error {
  public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ifm
