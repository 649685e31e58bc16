#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "emx/errors.hpp"

namespace emx {

// Two token kinds trade on separate books: UPX backs grid electricity,
// SPX backs the rooftop PV share. One token = the right to one kWh.
// Currency amounts are integer minor units (cents).
enum class TokenKind { UPX, SPX };
enum class Asset { UPX, SPX, CUR };
enum class Role { Student, System };
enum class TxKind { Mint, Burn, Transfer, CurrencyTransfer };

constexpr TokenKind kTokenKinds[] = {TokenKind::UPX, TokenKind::SPX};

const char* to_string(TokenKind k);
const char* to_string(Asset a);
const char* to_string(TxKind k);
TokenKind token_from_string(const std::string& s);
Asset asset_from_string(const std::string& s);
TxKind txkind_from_string(const std::string& s);
inline Asset to_asset(TokenKind k) { return k == TokenKind::UPX ? Asset::UPX : Asset::SPX; }

struct LedgerTx {
    std::uint64_t seq = 0;
    TxKind kind = TxKind::Transfer;
    Asset asset = Asset::UPX;
    std::string from;
    std::string to;
    std::int64_t amount = 0;
    int day = 0;          // 0 = genesis/issuance, 1..D trading days, D also settlement
    std::string cause;    // short tag: "endowment", "trade", "settlement_buyback", ...
};

struct Balances {
    std::int64_t upx = 0;
    std::int64_t spx = 0;
    std::int64_t currency = 0;

    std::int64_t& of(Asset a) { return a == Asset::UPX ? upx : a == Asset::SPX ? spx : currency; }
    std::int64_t of(Asset a) const { return a == Asset::UPX ? upx : a == Asset::SPX ? spx : currency; }
    bool operator==(const Balances&) const = default;
};

/* Append-only token ledger.
 *
 * All balances are non-negative with one sanctioned exception: the system
 * account's currency balance is the signed settlement reserve. Every
 * operation validates before mutating, so a failed apply is a no-op. The
 * log is the source of truth; replaying it from empty reproduces the state.
 */
class Ledger {
public:
    void create_account(const std::string& id, Role role);
    bool has_account(const std::string& id) const { return accounts_.count(id) != 0; }
    Role role_of(const std::string& id) const;
    const std::string& system_account() const;

    // Validates and applies; throws Error and leaves state untouched on failure.
    void apply_tx(const LedgerTx& tx);

    // Convenience builders: fill seq from the log and apply.
    const LedgerTx& mint(Asset a, const std::string& to, std::int64_t amount, int day, const std::string& cause);
    const LedgerTx& burn(Asset a, const std::string& from, std::int64_t amount, int day, const std::string& cause);
    const LedgerTx& transfer(TokenKind k, const std::string& from, const std::string& to, std::int64_t amount,
                             int day, const std::string& cause);
    const LedgerTx& pay(const std::string& from, const std::string& to, std::int64_t amount, int day,
                        const std::string& cause);

    std::int64_t balance_of(const std::string& id, TokenKind k) const;
    std::int64_t currency_of(const std::string& id) const;
    // Total undamaged tokens still held by student accounts (system excluded).
    std::int64_t aggregate_remaining(TokenKind k) const;
    // Signed settlement reserve = the system account's currency position.
    std::int64_t reserve() const;

    std::int64_t minted(Asset a) const { return minted_.of(a); }
    std::int64_t burned(Asset a) const { return burned_.of(a); }

    const std::vector<LedgerTx>& log() const { return log_; }
    const std::map<std::string, Balances>& accounts() const { return accounts_; }
    std::uint64_t next_seq() const { return log_.size() + 1; }

    bool operator==(const Ledger& other) const {
        return accounts_ == other.accounts_ && roles_ == other.roles_ && system_ == other.system_;
    }

private:
    void check_amount(const LedgerTx& tx) const;
    const Balances& bal(const std::string& id) const;

    std::map<std::string, Balances> accounts_;
    std::map<std::string, Role> roles_;
    std::string system_;
    std::vector<LedgerTx> log_;
    Balances minted_;
    Balances burned_;
};

// JSON Lines log export/import. Import replays onto a fresh ledger,
// registering accounts on first appearance (mints identify the system).
void save_ledger_log(const Ledger& ledger, std::ostream& out);
Ledger load_ledger_log(std::istream& in);

} // namespace emx
