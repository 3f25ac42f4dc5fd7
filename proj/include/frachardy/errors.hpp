#pragma once

#include <stdexcept>
#include <string>

namespace frachardy {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// quadrature
struct NonConvergence : Error { using Error::Error; };
struct DivergentIntegrand : Error { using Error::Error; };

// kernel and constants
struct InvalidParams : Error { using Error::Error; };
struct SingularArgument : Error { using Error::Error; };
struct NoBracket : Error { using Error::Error; };
struct NotSelfSimilarRegime : Error { using Error::Error; };

// discretization and evolution
struct InvalidGrid : Error { using Error::Error; };
struct InvalidProfile : Error { using Error::Error; };
struct ZeroDenominator : Error { using Error::Error; };
struct StepFailure : Error { using Error::Error; };
struct InnerDivergence : Error { using Error::Error; };

// inequality lab and experiments
struct SearchFailure : Error { using Error::Error; };
struct OracleUnavailable : Error { using Error::Error; };
struct ReportInconclusive : Error { using Error::Error; };

// io
struct ValidationError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace frachardy
