#pragma once

#include <stdexcept>
#include <string>

namespace stdgmrf {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define STDGMRF_DEFINE_ERROR(Name)                                  \
  struct Name : Error {                                             \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

STDGMRF_DEFINE_ERROR(InvalidLattice);
STDGMRF_DEFINE_ERROR(InvalidEdge);
STDGMRF_DEFINE_ERROR(UnsupportedGraph);
STDGMRF_DEFINE_ERROR(SingularLayer);
STDGMRF_DEFINE_ERROR(InvalidObservation);
STDGMRF_DEFINE_ERROR(InvalidInput);
STDGMRF_DEFINE_ERROR(InvalidMask);
STDGMRF_DEFINE_ERROR(SolverDiverged);
STDGMRF_DEFINE_ERROR(NumericalFailure);
STDGMRF_DEFINE_ERROR(TooLarge);

#undef STDGMRF_DEFINE_ERROR

struct TrainingDiverged : Error {
  int iteration;
  TrainingDiverged(int iter, const std::string& msg)
      : Error("TrainingDiverged at iteration " + std::to_string(iter) + ": " + msg),
        iteration(iter) {}
};

}  // namespace stdgmrf
