// Copyright (c) 2026 SDPN-DR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SDPN_BINARY_IO_H_
#define SDPN_BINARY_IO_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sdpn {

// Little-endian serialization helpers shared by the binary file formats.
class ByteWriter {
 public:
  void PutBytes(std::string_view bytes);
  void PutU8(std::uint8_t v);
  void PutU16(std::uint16_t v);
  void PutU32(std::uint32_t v);
  void PutU64(std::uint64_t v);
  void PutF64(double v);
  // u32 length followed by the raw bytes.
  void PutString(std::string_view s);

  const std::string& bytes() const { return buffer_; }

 private:
  std::string buffer_;
};

// Reads from an in-memory buffer. Every failure throws MalformedFile with
// the byte offset at which decoding stopped.
class ByteReader {
 public:
  ByteReader(std::string buffer, std::string source)
      : buffer_(std::move(buffer)), source_(std::move(source)) {}

  std::string GetBytes(std::size_t n);
  std::uint8_t GetU8();
  std::uint16_t GetU16();
  std::uint32_t GetU32();
  std::uint64_t GetU64();
  double GetF64();
  std::string GetString();

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return buffer_.size() - offset_; }
  bool AtEnd() const { return offset_ == buffer_.size(); }
  [[noreturn]] void Malformed(const std::string& what) const;

 private:
  void Require(std::size_t n, const char* what);

  std::string buffer_;
  std::string source_;
  std::size_t offset_ = 0;
};

std::string ReadFileBytes(const std::string& path);
// Writes to `path + ".tmp"` then renames over `path`.
void WriteFileAtomic(const std::string& path, const std::string& bytes);

// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view bytes);

}  // namespace sdpn

#endif  // SDPN_BINARY_IO_H_
