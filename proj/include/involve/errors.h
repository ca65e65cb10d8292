#pragma once

#include <stdexcept>
#include <string>

namespace involve {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat and specific.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define INVOLVE_DEFINE_ERROR(Name)                  \
    class Name : public Error {                     \
    public:                                         \
        using Error::Error;                         \
    }

INVOLVE_DEFINE_ERROR(EmptyDocument);
INVOLVE_DEFINE_ERROR(EmptyInput);
INVOLVE_DEFINE_ERROR(DimensionError);
INVOLVE_DEFINE_ERROR(DegenerateRange);
INVOLVE_DEFINE_ERROR(EmbedderError);
INVOLVE_DEFINE_ERROR(EmptyVector);
INVOLVE_DEFINE_ERROR(EmptyGeneration);
INVOLVE_DEFINE_ERROR(GenerationFailed);
INVOLVE_DEFINE_ERROR(PartitionDegenerate);
INVOLVE_DEFINE_ERROR(ModelLoadError);
INVOLVE_DEFINE_ERROR(NumericalError);
INVOLVE_DEFINE_ERROR(ShapeError);
INVOLVE_DEFINE_ERROR(InsufficientData);
INVOLVE_DEFINE_ERROR(AUCUndefined);
INVOLVE_DEFINE_ERROR(ConfigError);
INVOLVE_DEFINE_ERROR(IoError);
INVOLVE_DEFINE_ERROR(FormatError);

#undef INVOLVE_DEFINE_ERROR

}  // namespace involve
