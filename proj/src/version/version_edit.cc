#include "version/version_edit.h"

#include "util/coding.h"
#include "util/crc32.h"

namespace alsm {

void EncodeSstMeta(const SstMeta& m, std::string* dst) {
  PutFixed64(dst, m.file_id.value);
  PutFixed32(dst, static_cast<uint32_t>(m.level));
  PutFixed64(dst, m.file_size);
  PutFixed8(dst, static_cast<uint8_t>(m.durability));
  PutFixed64(dst, m.birth_epoch.value);
  PutFixed32(dst, m.checksum);
  PutFixed64(dst, m.record_count);
  PutFixed64(dst, m.max_seqno);
  PutLengthPrefixed(dst, m.smallest);
  PutLengthPrefixed(dst, m.largest);
}

namespace {

bool DecodeSstMeta(Decoder* d, SstMeta* m) {
  uint32_t level;
  uint8_t durability;
  std::string_view smallest, largest;
  if (!d->GetFixed64(&m->file_id.value) || !d->GetFixed32(&level) ||
      !d->GetFixed64(&m->file_size) || !d->GetFixed8(&durability) ||
      !d->GetFixed64(&m->birth_epoch.value) || !d->GetFixed32(&m->checksum) ||
      !d->GetFixed64(&m->record_count) || !d->GetFixed64(&m->max_seqno) ||
      !d->GetLengthPrefixed(&smallest) || !d->GetLengthPrefixed(&largest)) {
    return false;
  }
  if (durability > 1 || level > 64) return false;
  m->level = static_cast<int>(level);
  m->durability = static_cast<Durability>(durability);
  m->smallest.assign(smallest);
  m->largest.assign(largest);
  return true;
}

}  // namespace

void VersionEdit::EncodeTo(std::string* dst) const {
  if (last_seqno || next_file_id) {
    PutFixed8(dst, static_cast<uint8_t>(EditType::kSeqnoMark));
    PutFixed8(dst, (last_seqno ? 1 : 0) | (next_file_id ? 2 : 0));
    PutFixed64(dst, last_seqno.value_or(0));
    PutFixed64(dst, next_file_id.value_or(0));
  }
  for (const auto& d : deleted) {
    PutFixed8(dst, static_cast<uint8_t>(EditType::kDeleteFile));
    PutFixed64(dst, d.file_id.value);
    PutFixed32(dst, static_cast<uint32_t>(d.level));
  }
  for (const auto& m : added) {
    PutFixed8(dst, static_cast<uint8_t>(EditType::kAddFile));
    EncodeSstMeta(m, dst);
  }
  for (const auto& id : marked_durable) {
    PutFixed8(dst, static_cast<uint8_t>(EditType::kMarkDurable));
    PutFixed64(dst, id.value);
  }
  for (const auto& e : ledger_opened) {
    PutFixed8(dst, static_cast<uint8_t>(EditType::kLedgerOpen));
    PutFixed64(dst, e.epoch.value);
    PutFixed64(dst, e.fsync_batch_id);
    PutFixed32(dst, static_cast<uint32_t>(e.output_level));
    PutFixed8(dst, e.drop_tombstones ? 1 : 0);
    PutFixed32(dst, static_cast<uint32_t>(e.parents.size()));
    for (const auto& p : e.parents) EncodeSstMeta(p, dst);
    PutFixed32(dst, static_cast<uint32_t>(e.offspring.size()));
    for (const auto& o : e.offspring) PutFixed64(dst, o.value);
  }
  for (const auto& e : ledger_closed) {
    PutFixed8(dst, static_cast<uint8_t>(EditType::kLedgerClose));
    PutFixed64(dst, e.value);
  }
}

Status VersionEdit::DecodeFrom(std::string_view src) {
  *this = VersionEdit();
  Decoder d(src);
  auto bad = [](const char* what) { return Status::Corruption(std::string("manifest: ") + what); };
  while (!d.empty()) {
    uint8_t type;
    d.GetFixed8(&type);
    switch (static_cast<EditType>(type)) {
      case EditType::kSeqnoMark: {
        uint8_t present;
        uint64_t seq, next;
        if (!d.GetFixed8(&present) || !d.GetFixed64(&seq) || !d.GetFixed64(&next)) {
          return bad("seqno_mark");
        }
        if (present & 1) last_seqno = seq;
        if (present & 2) next_file_id = next;
        break;
      }
      case EditType::kDeleteFile: {
        DeletedFile f;
        uint32_t level;
        if (!d.GetFixed64(&f.file_id.value) || !d.GetFixed32(&level)) return bad("delete_file");
        f.level = static_cast<int>(level);
        deleted.push_back(f);
        break;
      }
      case EditType::kAddFile: {
        SstMeta m;
        if (!DecodeSstMeta(&d, &m)) return bad("add_file");
        added.push_back(std::move(m));
        break;
      }
      case EditType::kMarkDurable: {
        FileId id;
        if (!d.GetFixed64(&id.value)) return bad("mark_durable");
        marked_durable.push_back(id);
        break;
      }
      case EditType::kLedgerOpen: {
        LedgerOpenRecord e;
        uint32_t level, np, no;
        uint8_t drop;
        if (!d.GetFixed64(&e.epoch.value) || !d.GetFixed64(&e.fsync_batch_id) ||
            !d.GetFixed32(&level) || !d.GetFixed8(&drop) || !d.GetFixed32(&np)) {
          return bad("ledger_open");
        }
        e.output_level = static_cast<int>(level);
        e.drop_tombstones = drop != 0;
        for (uint32_t i = 0; i < np; ++i) {
          SstMeta m;
          if (!DecodeSstMeta(&d, &m)) return bad("ledger_open parent");
          e.parents.push_back(std::move(m));
        }
        if (!d.GetFixed32(&no)) return bad("ledger_open");
        for (uint32_t i = 0; i < no; ++i) {
          FileId id;
          if (!d.GetFixed64(&id.value)) return bad("ledger_open offspring");
          e.offspring.push_back(id);
        }
        ledger_opened.push_back(std::move(e));
        break;
      }
      case EditType::kLedgerClose: {
        EpochId e;
        if (!d.GetFixed64(&e.value)) return bad("ledger_close");
        ledger_closed.push_back(e);
        break;
      }
      default:
        return bad("unknown edit type");
    }
  }
  return Status::OK();
}

void AppendManifestRecord(std::string_view payload, std::string* dst) {
  PutFixed32(dst, static_cast<uint32_t>(payload.size()));
  dst->append(payload);
  PutFixed32(dst, crc32::Value(payload));
}

ManifestReadResult ReadManifestRecords(std::string_view data) {
  ManifestReadResult result;
  while (!data.empty()) {
    if (data.size() < 8) {
      result.torn_tail = true;
      break;
    }
    const uint32_t len = DecodeFixed32(data.data());
    if (data.size() - 8 < len) {
      result.torn_tail = true;
      break;
    }
    std::string_view payload = data.substr(4, len);
    const uint32_t crc = DecodeFixed32(data.data() + 4 + len);
    VersionEdit edit;
    if (crc32::Value(payload) != crc || !edit.DecodeFrom(payload).ok()) {
      result.torn_tail = true;
      break;
    }
    result.edits.push_back(std::move(edit));
    data.remove_prefix(8 + len);
  }
  return result;
}

}  // namespace alsm
