// Copyright 2026 The wsinuc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "wsinuc/errors.hpp"

namespace wsinuc::kernels {

#if !defined(WSINUC_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(WSINUC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa best_supported_isa() { return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar; }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  if (name == "auto" || name.empty()) return best_supported_isa();
  throw UsageError("unknown ISA '" + std::string(name) + "' (expected scalar, avx2 or auto)");
}

namespace {

const KernelTable* table_for(Isa isa) {
  return isa == Isa::kAvx2 ? avx2_table() : &scalar_table();
}

const KernelTable* initial_table() {
  Isa isa = best_supported_isa();
  if (const char* env = std::getenv("WSINUC_ISA")) {
    isa = parse_isa(env);
    if (!isa_supported(isa)) {
      throw UsageError("WSINUC_ISA=" + std::string(env) + " is not supported on this machine");
    }
  }
  return table_for(isa);
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
  if (!isa_supported(isa)) {
    throw UsageError("kernel ISA '" + std::string(isa_name(isa)) + "' is not supported here");
  }
  current().store(table_for(isa), std::memory_order_release);
}

}  // namespace wsinuc::kernels
