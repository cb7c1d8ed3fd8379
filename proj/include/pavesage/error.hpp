#pragma once

#include <stdexcept>
#include <string>

namespace pavesage {

// Every failure the library raises derives from Error so callers can catch
// one type at the CLI boundary and still discriminate where it matters.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class VocabularyError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class MetricError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace pavesage
