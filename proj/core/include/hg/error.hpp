#pragma once

#include <stdexcept>
#include <string>

namespace hg {

// Base of everything this library throws on purpose.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Dimension, mask or layout violations (also raised when a loaded tensor has
// the wrong shape).
class shape_error : public error {
  public:
    using error::error;
};

// Problems with input files or datasets: bad archives, unknown vocab symbols,
// malformed JSONL, a dataset missing a class. The CLI maps these to exit 3.
class data_error : public error {
  public:
    using error::error;
};

class missing_tensor_error : public data_error {
  public:
    using data_error::data_error;
};

class truncated_error : public data_error {
  public:
    using data_error::data_error;
};

class nonfinite_error : public data_error {
  public:
    using data_error::data_error;
};

class unknown_symbol_error : public data_error {
  public:
    using data_error::data_error;
};

class class_missing_error : public data_error {
  public:
    using data_error::data_error;
};

// Numeric/degenerate failures: singular systems, degenerate directions or
// variance, failed sampling. The CLI maps these (and shape_error) to exit 4.
class numeric_error : public error {
  public:
    using error::error;
};

class singular_error : public numeric_error {
  public:
    using numeric_error::numeric_error;
};

class degenerate_error : public numeric_error {
  public:
    using numeric_error::numeric_error;
};

class sampling_error : public numeric_error {
  public:
    using numeric_error::numeric_error;
};

}  // namespace hg
