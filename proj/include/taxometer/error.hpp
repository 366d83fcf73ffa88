#pragma once

#include <stdexcept>
#include <string>

namespace taxometer {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TAXOMETER_DEFINE_ERROR(Name)   \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

// taxonomy loading and queries
TAXOMETER_DEFINE_ERROR(ParseError);
TAXOMETER_DEFINE_ERROR(CycleError);
TAXOMETER_DEFINE_ERROR(OrphanError);
TAXOMETER_DEFINE_ERROR(DuplicateIdError);
TAXOMETER_DEFINE_ERROR(UnknownConceptError);
TAXOMETER_DEFINE_ERROR(PseudoLeafError);
TAXOMETER_DEFINE_ERROR(PseudoConceptError);

// metrics
TAXOMETER_DEFINE_ERROR(ConceptSetMismatchError);
TAXOMETER_DEFINE_ERROR(DegenerateInputError);
TAXOMETER_DEFINE_ERROR(MissingEmbeddingError);
TAXOMETER_DEFINE_ERROR(EmptyClassificationError);
TAXOMETER_DEFINE_ERROR(InvalidProbabilityError);
TAXOMETER_DEFINE_ERROR(AllNAError);

// mutation
TAXOMETER_DEFINE_ERROR(NoEligiblePairError);

// model gateway
TAXOMETER_DEFINE_ERROR(BackendUnavailableError);
TAXOMETER_DEFINE_ERROR(MalformedResponseError);
TAXOMETER_DEFINE_ERROR(NoMaskError);

#undef TAXOMETER_DEFINE_ERROR

}  // namespace taxometer
