#pragma once

#include <stdexcept>
#include <string>

namespace latentpatch {

/// Broad category of a failure, used by the CLI to pick an exit code.
enum class ErrorKind {
    parameter,   // caller-supplied value violates a precondition
    data,        // input file or tensor content is unusable
    invariant,   // internal consistency check failed
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define LATENTPATCH_DEFINE_ERROR(Name, Kind)                                         \
    class Name : public Error {                                                      \
    public:                                                                          \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}     \
    };

LATENTPATCH_DEFINE_ERROR(ParameterError, parameter)
LATENTPATCH_DEFINE_ERROR(ShapeError, data)
LATENTPATCH_DEFINE_ERROR(BoundsError, parameter)
LATENTPATCH_DEFINE_ERROR(FormatError, data)
LATENTPATCH_DEFINE_ERROR(UnsupportedDtypeError, data)
LATENTPATCH_DEFINE_ERROR(OrderError, data)
LATENTPATCH_DEFINE_ERROR(EmptyInputError, data)
LATENTPATCH_DEFINE_ERROR(InsufficientDataError, data)
LATENTPATCH_DEFINE_ERROR(EmptyMaskError, parameter)
LATENTPATCH_DEFINE_ERROR(EmptyCandidatesError, data)
LATENTPATCH_DEFINE_ERROR(ScaleError, parameter)
LATENTPATCH_DEFINE_ERROR(IncompleteProvenanceError, data)
LATENTPATCH_DEFINE_ERROR(AttributeNameError, parameter)
LATENTPATCH_DEFINE_ERROR(EmptySelectionError, data)
LATENTPATCH_DEFINE_ERROR(DegenerateSourceError, data)
LATENTPATCH_DEFINE_ERROR(IoError, data)
LATENTPATCH_DEFINE_ERROR(InvariantError, invariant)

#undef LATENTPATCH_DEFINE_ERROR

} // namespace latentpatch
