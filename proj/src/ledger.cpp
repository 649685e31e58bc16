#include "emx/ledger.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"

namespace emx {

const char* to_string(TokenKind k) { return k == TokenKind::UPX ? "UPX" : "SPX"; }
const char* to_string(Asset a) { return a == Asset::UPX ? "UPX" : a == Asset::SPX ? "SPX" : "CUR"; }

const char* to_string(TxKind k) {
    switch (k) {
    case TxKind::Mint: return "mint";
    case TxKind::Burn: return "burn";
    case TxKind::Transfer: return "transfer";
    case TxKind::CurrencyTransfer: return "currency_transfer";
    }
    return "?";
}

TokenKind token_from_string(const std::string& s) {
    if (s == "UPX") return TokenKind::UPX;
    if (s == "SPX") return TokenKind::SPX;
    fail(Errc::ParseError, "unknown token kind: " + s);
}

Asset asset_from_string(const std::string& s) {
    if (s == "UPX") return Asset::UPX;
    if (s == "SPX") return Asset::SPX;
    if (s == "CUR") return Asset::CUR;
    fail(Errc::ParseError, "unknown asset: " + s);
}

TxKind txkind_from_string(const std::string& s) {
    if (s == "mint") return TxKind::Mint;
    if (s == "burn") return TxKind::Burn;
    if (s == "transfer") return TxKind::Transfer;
    if (s == "currency_transfer") return TxKind::CurrencyTransfer;
    fail(Errc::ParseError, "unknown tx kind: " + s);
}

void Ledger::create_account(const std::string& id, Role role) {
    if (accounts_.count(id)) fail(Errc::DuplicateAccount, "account already exists: " + id);
    if (role == Role::System) {
        if (!system_.empty()) fail(Errc::DuplicateAccount, "second system account: " + id);
        system_ = id;
    }
    accounts_[id] = Balances{};
    roles_[id] = role;
}

Role Ledger::role_of(const std::string& id) const {
    auto it = roles_.find(id);
    if (it == roles_.end()) fail(Errc::UnknownAccount, "unknown account: " + id);
    return it->second;
}

const std::string& Ledger::system_account() const {
    if (system_.empty()) fail(Errc::UnknownAccount, "no system account registered");
    return system_;
}

const Balances& Ledger::bal(const std::string& id) const {
    auto it = accounts_.find(id);
    if (it == accounts_.end()) fail(Errc::UnknownAccount, "unknown account: " + id);
    return it->second;
}

void Ledger::check_amount(const LedgerTx& tx) const {
    if (tx.amount < 0) fail(Errc::InvalidOrder, "negative amount in tx seq " + std::to_string(tx.seq));
}

void Ledger::apply_tx(const LedgerTx& tx) {
    // validate everything first; mutate only after all checks pass
    if (tx.seq != next_seq())
        fail(Errc::NonMonotoneSeq, "tx seq " + std::to_string(tx.seq) + ", expected " + std::to_string(next_seq()));
    check_amount(tx);

    const bool currency = tx.asset == Asset::CUR;
    if (tx.kind == TxKind::Transfer && currency)
        fail(Errc::InvalidOrder, "transfer must move a token kind, not currency");
    if (tx.kind == TxKind::CurrencyTransfer && !currency)
        fail(Errc::InvalidOrder, "currency_transfer must move CUR");

    switch (tx.kind) {
    case TxKind::Mint: {
        if (tx.from != system_account())
            fail(Errc::InvalidOrder, "mint must originate from the system account");
        bal(tx.to);
        accounts_[tx.to].of(tx.asset) += tx.amount;
        minted_.of(tx.asset) += tx.amount;
        break;
    }
    case TxKind::Burn: {
        if (tx.to != system_account())
            fail(Errc::InvalidOrder, "burn must terminate at the system account");
        const Balances& b = bal(tx.from);
        // the system's currency is the signed reserve and may go negative
        const bool exempt = tx.asset == Asset::CUR && tx.from == system_;
        if (!exempt && b.of(tx.asset) < tx.amount)
            fail(Errc::InsufficientBalance, "burn exceeds balance of " + tx.from);
        accounts_[tx.from].of(tx.asset) -= tx.amount;
        burned_.of(tx.asset) += tx.amount;
        break;
    }
    case TxKind::Transfer:
    case TxKind::CurrencyTransfer: {
        const Balances& from = bal(tx.from);
        bal(tx.to);
        const bool exempt = tx.asset == Asset::CUR && tx.from == system_;
        if (!exempt && from.of(tx.asset) < tx.amount)
            fail(Errc::InsufficientBalance,
                 std::string(to_string(tx.asset)) + " balance of " + tx.from + " below " + std::to_string(tx.amount));
        accounts_[tx.from].of(tx.asset) -= tx.amount;
        accounts_[tx.to].of(tx.asset) += tx.amount;
        break;
    }
    }
    log_.push_back(tx);
}

const LedgerTx& Ledger::mint(Asset a, const std::string& to, std::int64_t amount, int day, const std::string& cause) {
    apply_tx(LedgerTx{next_seq(), TxKind::Mint, a, system_account(), to, amount, day, cause});
    return log_.back();
}

const LedgerTx& Ledger::burn(Asset a, const std::string& from, std::int64_t amount, int day,
                             const std::string& cause) {
    apply_tx(LedgerTx{next_seq(), TxKind::Burn, a, from, system_account(), amount, day, cause});
    return log_.back();
}

const LedgerTx& Ledger::transfer(TokenKind k, const std::string& from, const std::string& to, std::int64_t amount,
                                 int day, const std::string& cause) {
    apply_tx(LedgerTx{next_seq(), TxKind::Transfer, to_asset(k), from, to, amount, day, cause});
    return log_.back();
}

const LedgerTx& Ledger::pay(const std::string& from, const std::string& to, std::int64_t amount, int day,
                            const std::string& cause) {
    apply_tx(LedgerTx{next_seq(), TxKind::CurrencyTransfer, Asset::CUR, from, to, amount, day, cause});
    return log_.back();
}

std::int64_t Ledger::balance_of(const std::string& id, TokenKind k) const { return bal(id).of(to_asset(k)); }

std::int64_t Ledger::currency_of(const std::string& id) const { return bal(id).currency; }

std::int64_t Ledger::aggregate_remaining(TokenKind k) const {
    std::int64_t sum = 0;
    for (const auto& [id, b] : accounts_)
        if (roles_.at(id) == Role::Student) sum += b.of(to_asset(k));
    return sum;
}

std::int64_t Ledger::reserve() const { return bal(system_account()).currency; }

void save_ledger_log(const Ledger& ledger, std::ostream& out) {
    for (const LedgerTx& tx : ledger.log()) {
        nlohmann::ordered_json j;
        j["seq"] = tx.seq;
        j["kind"] = to_string(tx.kind);
        j["token"] = to_string(tx.asset);
        j["from"] = tx.from;
        j["to"] = tx.to;
        j["amount"] = tx.amount;
        j["day"] = tx.day;
        j["cause"] = tx.cause;
        out << j.dump() << '\n';
    }
}

Ledger load_ledger_log(std::istream& in) {
    std::vector<LedgerTx> txs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            LedgerTx tx;
            tx.seq = j.at("seq").get<std::uint64_t>();
            tx.kind = txkind_from_string(j.at("kind").get<std::string>());
            tx.asset = asset_from_string(j.at("token").get<std::string>());
            tx.from = j.at("from").get<std::string>();
            tx.to = j.at("to").get<std::string>();
            tx.amount = j.at("amount").get<std::int64_t>();
            tx.day = j.at("day").get<int>();
            tx.cause = j.at("cause").get<std::string>();
            txs.push_back(std::move(tx));
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::ParseError, "ledger log line " + std::to_string(lineno) + ": " + e.what());
        }
    }

    Ledger ledger;
    // first pass: the mint source / burn sink is the system account
    std::string system;
    for (const LedgerTx& tx : txs) {
        const std::string* sys = nullptr;
        if (tx.kind == TxKind::Mint) sys = &tx.from;
        if (tx.kind == TxKind::Burn) sys = &tx.to;
        if (sys) {
            if (system.empty()) system = *sys;
            else if (system != *sys) fail(Errc::ParseError, "conflicting system accounts in log");
        }
    }
    if (!system.empty()) ledger.create_account(system, Role::System);
    for (const LedgerTx& tx : txs) {
        for (const std::string* id : {&tx.from, &tx.to})
            if (!id->empty() && !ledger.has_account(*id)) ledger.create_account(*id, Role::Student);
        ledger.apply_tx(tx);
    }
    return ledger;
}

} // namespace emx
