/* Copyright 2026 The TinyEdge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tinyedge {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class QuantizationError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

// Raised while decoding binary containers. Carries the byte offset at which
// decoding failed.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class TimeoutError : public Error {
 public:
  TimeoutError(const std::string& what, int sends)
      : Error(what), sends_(sends) {}

  int sends() const noexcept { return sends_; }

 private:
  int sends_;
};

}  // namespace tinyedge
