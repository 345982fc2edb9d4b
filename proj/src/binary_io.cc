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

#include "sdpn/binary_io.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdpn/error.h"

namespace sdpn {

namespace {

template <typename T>
void AppendLittleEndian(std::string* out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out->append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T DecodeLittleEndian(const char* src) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void ByteWriter::PutBytes(std::string_view bytes) { buffer_.append(bytes); }
void ByteWriter::PutU8(std::uint8_t v) { AppendLittleEndian(&buffer_, v); }
void ByteWriter::PutU16(std::uint16_t v) { AppendLittleEndian(&buffer_, v); }
void ByteWriter::PutU32(std::uint32_t v) { AppendLittleEndian(&buffer_, v); }
void ByteWriter::PutU64(std::uint64_t v) { AppendLittleEndian(&buffer_, v); }
void ByteWriter::PutF64(double v) { AppendLittleEndian(&buffer_, v); }

void ByteWriter::PutString(std::string_view s) {
  PutU32(static_cast<std::uint32_t>(s.size()));
  PutBytes(s);
}

void ByteReader::Malformed(const std::string& what) const {
  Fail(ErrorCode::kMalformedFile, source_ + " at byte offset " +
                                      std::to_string(offset_) + ": " + what);
}

void ByteReader::Require(std::size_t n, const char* what) {
  if (remaining() < n) {
    Malformed(std::string("truncated while reading ") + what);
  }
}

std::string ByteReader::GetBytes(std::size_t n) {
  Require(n, "bytes");
  std::string out = buffer_.substr(offset_, n);
  offset_ += n;
  return out;
}

#define SDPN_DEFINE_GET(Name, Type)                                    \
  Type ByteReader::Name() {                                            \
    Require(sizeof(Type), #Type);                                      \
    Type v = DecodeLittleEndian<Type>(buffer_.data() + offset_);       \
    offset_ += sizeof(Type);                                           \
    return v;                                                          \
  }

SDPN_DEFINE_GET(GetU8, std::uint8_t)
SDPN_DEFINE_GET(GetU16, std::uint16_t)
SDPN_DEFINE_GET(GetU32, std::uint32_t)
SDPN_DEFINE_GET(GetU64, std::uint64_t)
SDPN_DEFINE_GET(GetF64, double)

#undef SDPN_DEFINE_GET

std::string ByteReader::GetString() {
  const std::uint32_t len = GetU32();
  if (len > remaining()) {
    Malformed("string length " + std::to_string(len) + " exceeds file");
  }
  return GetBytes(len);
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorCode::kIoError, "cannot open " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) Fail(ErrorCode::kIoError, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) Fail(ErrorCode::kIoError, "rename to " + path + ": " + ec.message());
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sdpn
