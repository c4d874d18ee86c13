#include "table/merge_iterator.h"

#include <algorithm>
#include <string>

namespace alsm {

namespace {

class HeapMergeIterator : public Iterator {
 public:
  explicit HeapMergeIterator(std::vector<std::unique_ptr<Iterator>> children)
      : children_(std::move(children)) {}

  bool Valid() const override { return !heap_.empty(); }

  void SeekToFirst() override {
    for (auto& c : children_) c->SeekToFirst();
    Rebuild();
  }

  void Seek(std::string_view target) override {
    for (auto& c : children_) c->Seek(target);
    Rebuild();
  }

  void Next() override {
    std::pop_heap(heap_.begin(), heap_.end(), Greater{});
    Iterator* top = heap_.back();
    top->Next();
    if (top->Valid()) {
      std::push_heap(heap_.begin(), heap_.end(), Greater{});
    } else {
      heap_.pop_back();
      if (!top->status().ok() && status_.ok()) status_ = top->status();
    }
  }

  std::string_view key() const override { return heap_.front()->key(); }
  std::string_view value() const override { return heap_.front()->value(); }

  Status status() const override {
    if (!status_.ok()) return status_;
    for (auto& c : children_) {
      if (Status s = c->status(); !s.ok()) return s;
    }
    return Status::OK();
  }

 private:
  struct Greater {
    bool operator()(Iterator* a, Iterator* b) const {
      return CompareEncodedInternalKeys(a->key(), b->key()) > 0;
    }
  };

  void Rebuild() {
    heap_.clear();
    for (auto& c : children_) {
      if (c->Valid()) {
        heap_.push_back(c.get());
      } else if (!c->status().ok() && status_.ok()) {
        status_ = c->status();
      }
    }
    std::make_heap(heap_.begin(), heap_.end(), Greater{});
  }

  std::vector<std::unique_ptr<Iterator>> children_;
  std::vector<Iterator*> heap_;
  Status status_;
};

// Skips shadowed versions, invisible records and (optionally) tombstones.
class DedupIterator : public Iterator {
 public:
  DedupIterator(std::unique_ptr<Iterator> input, MergeOptions options)
      : input_(std::move(input)), options_(options) {}

  bool Valid() const override { return valid_; }
  void SeekToFirst() override {
    input_->SeekToFirst();
    have_prev_ = false;
    FindNext();
  }
  void Seek(std::string_view target) override {
    input_->Seek(target);
    have_prev_ = false;
    FindNext();
  }
  void Next() override {
    input_->Next();
    FindNext();
  }
  std::string_view key() const override { return input_->key(); }
  std::string_view value() const override { return input_->value(); }
  Status status() const override { return input_->status(); }

 private:
  void FindNext() {
    valid_ = false;
    while (input_->Valid()) {
      ParsedInternalKey k;
      if (!ParseInternalKey(input_->key(), &k)) {
        input_->Next();
        continue;
      }
      if (k.seqno > options_.snapshot) {
        input_->Next();
        continue;
      }
      if (options_.dedup) {
        if (have_prev_ && k.user_key == prev_user_key_) {
          input_->Next();
          continue;
        }
        prev_user_key_.assign(k.user_key);
        have_prev_ = true;
      }
      if (options_.drop_tombstones && k.kind == ValueKind::kDelete) {
        input_->Next();
        continue;
      }
      valid_ = true;
      return;
    }
  }

  std::unique_ptr<Iterator> input_;
  MergeOptions options_;
  std::string prev_user_key_;
  bool have_prev_ = false;
  bool valid_ = false;
};

}  // namespace

std::unique_ptr<Iterator> NewHeapMergeIterator(std::vector<std::unique_ptr<Iterator>> children) {
  if (children.size() == 1) return std::move(children.front());
  return std::make_unique<HeapMergeIterator>(std::move(children));
}

std::unique_ptr<Iterator> NewMergeIterator(std::vector<std::unique_ptr<Iterator>> children,
                                           MergeOptions options) {
  return std::make_unique<DedupIterator>(NewHeapMergeIterator(std::move(children)), options);
}

}  // namespace alsm
