/*
 * Copyright 2026 The qvscan Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "qvscan/elf_reader.h"

#include <elf.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <system_error>

#include "qvscan/x86_decoder.h"

namespace qvscan {

namespace fs = std::filesystem;

namespace {

constexpr std::array<uint8_t, 4> kElfMagic = {0x7F, 'E', 'L', 'F'};

// Bounds-checked view over the raw image.
class Image {
 public:
  explicit Image(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  size_t size() const { return bytes_.size(); }

  template <typename T>
  T read(uint64_t offset, const char* structure) const {
    if (offset > bytes_.size() || sizeof(T) > bytes_.size() - offset) {
      throw ElfParseError(structure, "read of " + std::to_string(sizeof(T)) + " bytes at offset " +
                                         std::to_string(offset) + " exceeds file size");
    }
    T value;
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    return value;
  }

  void check_range(uint64_t offset, uint64_t length, const char* structure) const {
    if (offset > bytes_.size() || length > bytes_.size() - offset) {
      throw ElfParseError(structure, "range [" + std::to_string(offset) + ", +" + std::to_string(length) +
                                         ") exceeds file size " + std::to_string(bytes_.size()));
    }
  }

  std::string c_string(uint64_t table_offset, uint64_t table_size, uint64_t index,
                       const char* structure) const {
    if (index >= table_size) {
      throw ElfParseError(structure, "string index " + std::to_string(index) + " outside table");
    }
    const uint64_t start = table_offset + index;
    const uint64_t limit = table_offset + table_size;
    const auto* begin = bytes_.data() + start;
    const auto* end = static_cast<const uint8_t*>(std::memchr(begin, 0, limit - start));
    if (end == nullptr) throw ElfParseError(structure, "unterminated string");
    return std::string(reinterpret_cast<const char*>(begin), reinterpret_cast<const char*>(end));
  }

  const uint8_t* data() const { return bytes_.data(); }

 private:
  const std::vector<uint8_t>& bytes_;
};

struct Section {
  Elf64_Shdr header;
  std::string name;
};

struct RawSymbol {
  std::string name;
  uint64_t value = 0;
  uint64_t size = 0;
  uint8_t type = 0;
  uint8_t bind = 0;
  uint8_t visibility = 0;
  uint16_t shndx = 0;
  bool from_dynsym = false;
};

std::vector<uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::system_error(errno, std::generic_category(), "open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::system_error(errno, std::generic_category(), "read " + path.string());
  return bytes;
}

std::vector<Section> read_sections(const Image& img, const Elf64_Ehdr& eh) {
  std::vector<Section> sections;
  if (eh.e_shoff == 0 || eh.e_shnum == 0) return sections;
  if (eh.e_shentsize != sizeof(Elf64_Shdr)) {
    throw ElfParseError("section header table", "unexpected entry size " + std::to_string(eh.e_shentsize));
  }
  img.check_range(eh.e_shoff, uint64_t{eh.e_shnum} * sizeof(Elf64_Shdr), "section header table");
  sections.resize(eh.e_shnum);
  for (uint16_t i = 0; i < eh.e_shnum; ++i) {
    sections[i].header = img.read<Elf64_Shdr>(eh.e_shoff + uint64_t{i} * sizeof(Elf64_Shdr), "section header table");
  }
  if (eh.e_shstrndx != SHN_UNDEF && eh.e_shstrndx < sections.size()) {
    const auto& strtab = sections[eh.e_shstrndx].header;
    img.check_range(strtab.sh_offset, strtab.sh_size, "section name table");
    for (auto& s : sections) {
      s.name = img.c_string(strtab.sh_offset, strtab.sh_size, s.header.sh_name, "section name table");
    }
  }
  for (const auto& s : sections) {
    if (s.header.sh_type != SHT_NOBITS && s.header.sh_type != SHT_NULL) {
      img.check_range(s.header.sh_offset, s.header.sh_size, "section header table");
    }
  }
  return sections;
}

std::vector<Elf64_Phdr> read_segments(const Image& img, const Elf64_Ehdr& eh) {
  std::vector<Elf64_Phdr> segments;
  if (eh.e_phoff == 0 || eh.e_phnum == 0) return segments;
  if (eh.e_phentsize != sizeof(Elf64_Phdr)) {
    throw ElfParseError("program header table", "unexpected entry size " + std::to_string(eh.e_phentsize));
  }
  img.check_range(eh.e_phoff, uint64_t{eh.e_phnum} * sizeof(Elf64_Phdr), "program header table");
  for (uint16_t i = 0; i < eh.e_phnum; ++i) {
    segments.push_back(img.read<Elf64_Phdr>(eh.e_phoff + uint64_t{i} * sizeof(Elf64_Phdr), "program header table"));
  }
  return segments;
}

// Maps a virtual address to a file offset through the PT_LOAD segments.
std::optional<uint64_t> vaddr_to_offset(const std::vector<Elf64_Phdr>& segments, uint64_t vaddr) {
  for (const auto& ph : segments) {
    if (ph.p_type == PT_LOAD && vaddr >= ph.p_vaddr && vaddr < ph.p_vaddr + ph.p_filesz) {
      return ph.p_offset + (vaddr - ph.p_vaddr);
    }
  }
  return std::nullopt;
}

std::vector<RawSymbol> read_symbols(const Image& img, const std::vector<Section>& sections, const Section& symtab,
                                    bool from_dynsym) {
  const char* structure = from_dynsym ? ".dynsym" : ".symtab";
  std::vector<RawSymbol> symbols;
  if (symtab.header.sh_entsize != sizeof(Elf64_Sym)) {
    throw ElfParseError(structure, "unexpected entry size " + std::to_string(symtab.header.sh_entsize));
  }
  if (symtab.header.sh_link >= sections.size()) {
    throw ElfParseError(structure, "string table link " + std::to_string(symtab.header.sh_link) + " out of range");
  }
  const auto& strtab = sections[symtab.header.sh_link].header;
  const uint64_t count = symtab.header.sh_size / sizeof(Elf64_Sym);
  symbols.reserve(count);
  for (uint64_t i = 1; i < count; ++i) {
    const auto sym = img.read<Elf64_Sym>(symtab.header.sh_offset + i * sizeof(Elf64_Sym), structure);
    RawSymbol raw;
    raw.name = img.c_string(strtab.sh_offset, strtab.sh_size, sym.st_name, structure);
    raw.value = sym.st_value;
    raw.size = sym.st_size;
    raw.type = ELF64_ST_TYPE(sym.st_info);
    raw.bind = ELF64_ST_BIND(sym.st_info);
    raw.visibility = ELF64_ST_VISIBILITY(sym.st_other);
    raw.shndx = sym.st_shndx;
    raw.from_dynsym = from_dynsym;
    symbols.push_back(std::move(raw));
  }
  return symbols;
}

bool is_function_type(uint8_t type) { return type == STT_FUNC || type == STT_GNU_IFUNC; }

bool is_plt_section(std::string_view name) {
  return name == ".plt" || name == ".plt.sec" || name == ".plt.got" || name == ".iplt";
}

// Ranks names bound to the same address; lower wins.
int symbol_rank(const RawSymbol& s) {
  int rank = 0;
  if (s.bind != STB_GLOBAL) rank += 2;
  if (!s.from_dynsym) rank += 1;
  return rank;
}

struct DynamicInfo {
  std::vector<std::string> needed;
  std::vector<std::string> rpath;
  std::vector<std::string> runpath;
  std::optional<std::string> soname;
  uint64_t flags_1 = 0;
};

std::vector<std::string> split_path_list(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t colon = s.find(':', start);
    const size_t end = colon == std::string::npos ? s.size() : colon;
    if (end > start) out.push_back(s.substr(start, end - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  return out;
}

DynamicInfo read_dynamic(const Image& img, const std::vector<Section>& sections,
                         const std::vector<Elf64_Phdr>& segments) {
  DynamicInfo info;
  uint64_t dyn_offset = 0;
  uint64_t dyn_size = 0;
  for (const auto& s : sections) {
    if (s.header.sh_type == SHT_DYNAMIC) {
      dyn_offset = s.header.sh_offset;
      dyn_size = s.header.sh_size;
      break;
    }
  }
  if (dyn_size == 0) {
    for (const auto& ph : segments) {
      if (ph.p_type == PT_DYNAMIC) {
        dyn_offset = ph.p_offset;
        dyn_size = ph.p_filesz;
        break;
      }
    }
  }
  if (dyn_size == 0) return info;
  img.check_range(dyn_offset, dyn_size, ".dynamic");

  std::vector<Elf64_Dyn> entries;
  uint64_t strtab_addr = 0;
  uint64_t strtab_size = 0;
  for (uint64_t off = 0; off + sizeof(Elf64_Dyn) <= dyn_size; off += sizeof(Elf64_Dyn)) {
    const auto dyn = img.read<Elf64_Dyn>(dyn_offset + off, ".dynamic");
    if (dyn.d_tag == DT_NULL) break;
    if (dyn.d_tag == DT_STRTAB) strtab_addr = dyn.d_un.d_ptr;
    if (dyn.d_tag == DT_STRSZ) strtab_size = dyn.d_un.d_val;
    if (dyn.d_tag == DT_FLAGS_1) info.flags_1 = dyn.d_un.d_val;
    entries.push_back(dyn);
  }

  // Prefer the section view of the string table; fall back to segments.
  std::optional<uint64_t> strtab_offset;
  for (const auto& s : sections) {
    if (s.name == ".dynstr") {
      strtab_offset = s.header.sh_offset;
      strtab_size = s.header.sh_size;
    }
  }
  if (!strtab_offset && strtab_addr != 0) strtab_offset = vaddr_to_offset(segments, strtab_addr);

  auto string_at = [&](uint64_t index) {
    if (!strtab_offset) throw ElfParseError(".dynamic", "string entries without a dynamic string table");
    img.check_range(*strtab_offset, strtab_size, ".dynstr");
    return img.c_string(*strtab_offset, strtab_size, index, ".dynstr");
  };

  for (const auto& dyn : entries) {
    switch (dyn.d_tag) {
      case DT_NEEDED: info.needed.push_back(string_at(dyn.d_un.d_val)); break;
      case DT_SONAME: info.soname = string_at(dyn.d_un.d_val); break;
      case DT_RPATH: {
        auto parts = split_path_list(string_at(dyn.d_un.d_val));
        info.rpath.insert(info.rpath.end(), parts.begin(), parts.end());
        break;
      }
      case DT_RUNPATH: {
        auto parts = split_path_list(string_at(dyn.d_un.d_val));
        info.runpath.insert(info.runpath.end(), parts.begin(), parts.end());
        break;
      }
      default: break;
    }
  }
  return info;
}

// Relocation target address -> symbol name for JUMP_SLOT and GLOB_DAT entries.
struct SlotMaps {
  std::map<uint64_t, std::string> jump_slots;
  std::map<uint64_t, std::string> data_slots;
};

SlotMaps read_slot_relocations(const Image& img, const std::vector<Section>& sections,
                               const std::vector<RawSymbol>& dynsyms, bool strip_versions) {
  SlotMaps maps;
  for (const auto& s : sections) {
    if (s.header.sh_type != SHT_RELA) continue;
    if (s.header.sh_entsize != sizeof(Elf64_Rela)) {
      throw ElfParseError(s.name, "unexpected relocation entry size " + std::to_string(s.header.sh_entsize));
    }
    // Only relocations against the dynamic symbol table matter here.
    if (s.header.sh_link >= sections.size() || sections[s.header.sh_link].header.sh_type != SHT_DYNSYM) continue;
    const uint64_t count = s.header.sh_size / sizeof(Elf64_Rela);
    for (uint64_t i = 0; i < count; ++i) {
      const auto rela = img.read<Elf64_Rela>(s.header.sh_offset + i * sizeof(Elf64_Rela), s.name.c_str());
      const uint32_t type = ELF64_R_TYPE(rela.r_info);
      const uint32_t sym = ELF64_R_SYM(rela.r_info);
      if (sym == 0 || (type != R_X86_64_JUMP_SLOT && type != R_X86_64_GLOB_DAT)) continue;
      // dynsyms omits the null symbol at index 0.
      if (sym - 1 >= dynsyms.size()) {
        throw ElfParseError(s.name, "symbol index " + std::to_string(sym) + " out of range");
      }
      const auto& target = dynsyms[sym - 1];
      if (target.name.empty()) continue;
      std::string name = strip_versions ? strip_version(target.name) : target.name;
      if (type == R_X86_64_JUMP_SLOT) {
        maps.jump_slots[rela.r_offset] = std::move(name);
      } else if (is_function_type(target.type) || target.type == STT_NOTYPE) {
        maps.data_slots[rela.r_offset] = std::move(name);
      }
    }
  }
  return maps;
}

// Finds `jmp *slot(%rip)` in every PLT stub and maps the stub start to the
// slot's symbol. Stubs are laid out at fixed strides (sh_entsize, 16 when unset).
void map_plt_stubs(BinaryFile& bf, const std::vector<Section>& sections, const SlotMaps& slots) {
  if (!bf.is_x86_64()) return;
  X86_64Decoder decoder;
  for (const auto& s : sections) {
    if (!is_plt_section(s.name) || s.header.sh_type != SHT_PROGBITS) continue;
    const auto* code = bf.section_containing(s.header.sh_addr);
    if (code == nullptr) continue;
    const uint64_t stride = s.header.sh_entsize ? s.header.sh_entsize : 16;
    std::span<const uint8_t> bytes(code->bytes);
    uint64_t offset = s.header.sh_addr - code->address;
    const uint64_t end = offset + s.header.sh_size;
    while (offset < end && offset < bytes.size()) {
      const uint64_t addr = code->address + offset;
      auto insn = decoder.decode(bytes.subspan(offset, std::min<uint64_t>(end, bytes.size()) - offset), addr);
      if (!insn) {
        ++offset;
        continue;
      }
      if (insn->flow == FlowKind::kJumpIndirect && insn->memory_target) {
        const uint64_t stub = s.header.sh_addr + ((addr - s.header.sh_addr) / stride) * stride;
        const std::string* name = nullptr;
        if (auto it = slots.jump_slots.find(*insn->memory_target); it != slots.jump_slots.end()) name = &it->second;
        if (auto it = slots.data_slots.find(*insn->memory_target); !name && it != slots.data_slots.end()) {
          name = &it->second;
        }
        if (name != nullptr) {
          auto& target = bf.imported_syms.count(*name) ? bf.plt_map : bf.plt_local_map;
          target.emplace(stub, *name);
          target.emplace(addr, *name);
        }
      }
      offset += insn->length;
    }
  }
}

}  // namespace

std::string strip_version(std::string_view symbol) {
  const auto at = symbol.find('@');
  return std::string(at == std::string_view::npos ? symbol : symbol.substr(0, at));
}

bool BinaryFile::is_x86_64() const { return machine == EM_X86_64; }

const CodeSection* BinaryFile::section_containing(uint64_t addr) const {
  for (const auto& s : code_sections) {
    if (s.contains(addr)) return &s;
  }
  return nullptr;
}

const FunctionSymbol* BinaryFile::function_at(uint64_t addr) const {
  auto it = std::lower_bound(func_syms.begin(), func_syms.end(), addr,
                             [](const FunctionSymbol& f, uint64_t a) { return f.address < a; });
  if (it != func_syms.end() && it->address == addr) return &*it;
  return nullptr;
}

const FunctionSymbol* BinaryFile::function_named(std::string_view name) const {
  for (const auto& f : func_syms) {
    if (f.name == name) return &f;
    if (std::find(f.aliases.begin(), f.aliases.end(), name) != f.aliases.end()) return &f;
  }
  return nullptr;
}

std::vector<fs::path> default_search_paths() {
  return {"/lib/x86_64-linux-gnu", "/usr/lib/x86_64-linux-gnu", "/lib64", "/usr/lib64", "/lib", "/usr/lib",
          "/usr/local/lib"};
}

bool is_elf(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::array<uint8_t, EI_NIDENT> ident{};
  in.read(reinterpret_cast<char*>(ident.data()), ident.size());
  if (in.gcount() < static_cast<std::streamsize>(EI_DATA + 1)) return false;
  return std::equal(kElfMagic.begin(), kElfMagic.end(), ident.begin()) && ident[EI_CLASS] == ELFCLASS64 &&
         ident[EI_DATA] == ELFDATA2LSB;
}

BinaryFile parse_elf(const fs::path& path, bool strip_symbol_versions) {
  return parse_elf_bytes(read_file(path), path, strip_symbol_versions);
}

BinaryFile parse_elf_bytes(std::vector<uint8_t> bytes, const fs::path& path, bool strip_symbol_versions) {
  const Image img(bytes);
  if (img.size() < EI_NIDENT || !std::equal(kElfMagic.begin(), kElfMagic.end(), bytes.begin())) {
    throw ElfParseError("ELF header", "missing ELF magic");
  }
  if (bytes[EI_CLASS] != ELFCLASS64 || bytes[EI_DATA] != ELFDATA2LSB) {
    throw ElfParseError("ELF header", "only 64-bit little-endian files are supported");
  }
  const auto eh = img.read<Elf64_Ehdr>(0, "ELF header");

  BinaryFile bf;
  bf.path = path;
  bf.machine = eh.e_machine;
  bf.entry_point = eh.e_entry;

  const auto sections = read_sections(img, eh);
  const auto segments = read_segments(img, eh);
  const auto dyn = read_dynamic(img, sections, segments);
  bf.needed = dyn.needed;
  bf.soname = dyn.soname;
  bf.runpath = dyn.runpath.empty() ? dyn.rpath : dyn.runpath;

  const bool has_interp = std::any_of(segments.begin(), segments.end(),
                                      [](const Elf64_Phdr& ph) { return ph.p_type == PT_INTERP; });
  if (eh.e_type == ET_EXEC) {
    bf.kind = BinaryKind::kExecutable;
  } else if (eh.e_type == ET_DYN) {
    const bool pie = (dyn.flags_1 & DF_1_PIE) != 0 || (has_interp && !dyn.soname);
    bf.kind = pie ? BinaryKind::kExecutable : BinaryKind::kSharedObject;
  } else {
    throw ElfParseError("ELF header", "unsupported object type " + std::to_string(eh.e_type));
  }

  for (const auto& s : sections) {
    if (s.header.sh_type == SHT_PROGBITS && (s.header.sh_flags & SHF_EXECINSTR) && s.header.sh_size > 0) {
      CodeSection cs;
      cs.name = s.name;
      cs.address = s.header.sh_addr;
      cs.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(s.header.sh_offset),
                      bytes.begin() + static_cast<std::ptrdiff_t>(s.header.sh_offset + s.header.sh_size));
      bf.code_sections.push_back(std::move(cs));
    }
  }
  std::sort(bf.code_sections.begin(), bf.code_sections.end(),
            [](const CodeSection& a, const CodeSection& b) { return a.address < b.address; });

  std::vector<RawSymbol> dynsyms;
  std::vector<RawSymbol> all_syms;
  for (const auto& s : sections) {
    if (s.header.sh_type == SHT_DYNSYM) {
      dynsyms = read_symbols(img, sections, s, true);
    }
  }
  for (const auto& s : sections) {
    if (s.header.sh_type == SHT_SYMTAB) all_syms = read_symbols(img, sections, s, false);
  }
  all_syms.insert(all_syms.begin(), dynsyms.begin(), dynsyms.end());

  auto clean = [&](const std::string& name) { return strip_symbol_versions ? strip_version(name) : name; };

  for (const auto& sym : dynsyms) {
    if (sym.name.empty() || (sym.bind != STB_GLOBAL && sym.bind != STB_WEAK)) continue;
    if (sym.shndx == SHN_UNDEF) {
      bf.imported_syms.insert(clean(sym.name));
    } else if (is_function_type(sym.type) &&
               (sym.visibility == STV_DEFAULT || sym.visibility == STV_PROTECTED)) {
      bf.exported_syms.insert(clean(sym.name));
    }
  }
  for (const auto& name : bf.exported_syms) bf.imported_syms.erase(name);

  // Function symbols from both tables, one entry per address.
  std::map<uint64_t, std::vector<const RawSymbol*>> by_address;
  for (const auto& sym : all_syms) {
    if (sym.name.empty() || !is_function_type(sym.type) || sym.shndx == SHN_UNDEF || sym.value == 0) continue;
    if (bf.section_containing(sym.value) == nullptr) continue;
    by_address[sym.value].push_back(&sym);
  }
  for (auto& [addr, syms] : by_address) {
    std::stable_sort(syms.begin(), syms.end(), [](const RawSymbol* a, const RawSymbol* b) {
      const int ra = symbol_rank(*a);
      const int rb = symbol_rank(*b);
      return ra != rb ? ra < rb : a->name < b->name;
    });
    FunctionSymbol fn;
    fn.address = addr;
    fn.name = clean(syms.front()->name);
    for (const auto* s : syms) {
      fn.size = std::max(fn.size, s->size);
      auto name = clean(s->name);
      if (name != fn.name && std::find(fn.aliases.begin(), fn.aliases.end(), name) == fn.aliases.end()) {
        fn.aliases.push_back(std::move(name));
      }
    }
    bf.func_syms.push_back(std::move(fn));
  }

  const auto slots = read_slot_relocations(img, sections, dynsyms, strip_symbol_versions);
  for (const auto& [slot, name] : slots.jump_slots) bf.got_map.emplace(slot, name);
  for (const auto& [slot, name] : slots.data_slots) bf.got_map.emplace(slot, name);
  map_plt_stubs(bf, sections, slots);
  return bf;
}

std::optional<fs::path> resolve_dependency(std::string_view soname, const ResolutionConfig& cfg,
                                           const BinaryFile& origin) {
  return resolve_dependency(soname, cfg, origin.path, origin.runpath);
}

std::optional<fs::path> resolve_dependency(std::string_view soname, const ResolutionConfig& cfg,
                                           const fs::path& origin, const std::vector<std::string>& runpath) {
  if (soname.empty()) return std::nullopt;
  std::vector<fs::path> dirs;
  if (cfg.follow_runpath) {
    std::error_code ec;
    fs::path origin_dir = fs::weakly_canonical(origin, ec).parent_path();
    if (ec) origin_dir = origin.parent_path();
    for (std::string entry : runpath) {
      for (const std::string_view token : {"${ORIGIN}", "$ORIGIN"}) {
        for (size_t pos; (pos = entry.find(token)) != std::string::npos;) {
          entry.replace(pos, token.size(), origin_dir.string());
        }
      }
      dirs.emplace_back(entry);
    }
  }
  dirs.insert(dirs.end(), cfg.search_paths.begin(), cfg.search_paths.end());

  // A soname containing a slash is used as a path directly, as the loader does.
  if (soname.find('/') != std::string_view::npos) dirs = {fs::path()};

  for (const auto& dir : dirs) {
    const fs::path candidate = dir.empty() ? fs::path(soname) : dir / soname;
    std::error_code ec;
    if (fs::is_regular_file(candidate, ec)) {
      auto canonical = fs::canonical(candidate, ec);
      return ec ? candidate.lexically_normal() : canonical;
    }
  }
  return std::nullopt;
}

}  // namespace qvscan
