#pragma once

#include <stdexcept>
#include <string>

namespace vsense {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problems with input data. The CLI maps these to exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

/// Problems with run configuration or parameters. The CLI maps these to exit code 3.
class ConfigError : public Error {
public:
    using Error::Error;
};

// ingest
class MalformedFile : public DataError { public: using DataError::DataError; };
class MissingMetadata : public DataError { public: using DataError::DataError; };
class InsufficientFiles : public DataError { public: using DataError::DataError; };

class NonFiniteSample : public DataError {
public:
    NonFiniteSample(std::string file_id, std::string channel, std::size_t index)
        : DataError("non-finite sample in file '" + file_id + "', channel '" + channel +
                    "', index " + std::to_string(index)),
          file_id_(std::move(file_id)), channel_(std::move(channel)), index_(index) {}

    const std::string& file_id() const noexcept { return file_id_; }
    const std::string& channel() const noexcept { return channel_; }
    std::size_t index() const noexcept { return index_; }

private:
    std::string file_id_;
    std::string channel_;
    std::size_t index_;
};

// transforms
class InvalidScale : public ConfigError { public: using ConfigError::ConfigError; };

// reduce / models
class InsufficientData : public DataError { public: using DataError::DataError; };
class DegenerateData : public DataError { public: using DataError::DataError; };
class ShapeError : public DataError { public: using DataError::DataError; };
class UndefinedMetric : public DataError { public: using DataError::DataError; };
class UnknownLabel : public DataError { public: using DataError::DataError; };
class InvalidK : public ConfigError { public: using ConfigError::ConfigError; };

// synth / cli
class InvalidConfig : public ConfigError { public: using ConfigError::ConfigError; };

/// A model artifact was applied to features it was not trained on.
class IncompatibleArtifact : public DataError { public: using DataError::DataError; };

}  // namespace vsense
