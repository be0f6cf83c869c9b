// Copyright 2026 the pmkt authors
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

#include "pmkt/kernels.hpp"

namespace pmkt::kernels {

namespace {

const KernelTable* lookup(const std::string& name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "neon") return neon_table();
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("PMKT_KERNELS")) {
    if (const KernelTable* t = lookup(env)) return t;
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

bool select(const std::string& name) {
  const KernelTable* t = lookup(name);
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_relaxed);
  return true;
}

std::vector<std::string> available() {
  std::vector<std::string> out{"scalar"};
  if (avx2_table() != nullptr) out.emplace_back("avx2");
  if (neon_table() != nullptr) out.emplace_back("neon");
  return out;
}

}  // namespace pmkt::kernels
