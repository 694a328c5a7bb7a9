//! Ready-made protocol worlds: a ledger with the protocol contract deployed
//! and a population of enrolled/registered users. The game harness and the
//! scenario runner both drive these.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use crate::cbe::{
    self, day_from_civil, revocation_program, CbeAuthority, Day, EnrollAux, ReconfirmationCert,
    RevocationTable, UserKeys, REVOCATION_PROGRAM,
};
use crate::codec::{Canon, Digest};
use crate::contract;
use crate::ledger::tx::{Account, TxCall};
use crate::ledger::{FaultSet, Ledger, LedgerConfig, SubmitOutcome};
use crate::primitives::hash::HashKey;
use crate::primitives::pke::PkeKeypair;
use crate::rbe::{self, key_curator_program, InitAux, PublicParams, KEY_CURATOR_PROGRAM};

/// Parameters of a certificate-revocation world.
#[derive(Clone)]
pub struct CbeScenario {
    pub ledger: LedgerConfig,
    pub faults: FaultSet,
    pub tree_depth: u8,
    pub periods: u32,
    /// (label, certificate expiry) per user, enrolled in order.
    pub users: Vec<(Vec<u8>, Day)>,
    pub seed: u64,
}

impl CbeScenario {
    /// `n` generated users with staggered expiries late in 2022.
    pub fn simple(ledger: LedgerConfig, n: u32, seed: u64) -> CbeScenario {
        let users = (0..n)
            .map(|i| {
                let label = format!("user-{i}").into_bytes();
                (label, day_from_civil(2022, 1 + (i % 12), 15))
            })
            .collect();
        CbeScenario {
            ledger,
            faults: FaultSet::NONE,
            tree_depth: 4,
            periods: 4,
            users,
            seed,
        }
    }
}

pub struct CbeUser {
    pub label: Vec<u8>,
    pub keys: UserKeys,
    pub account: Account,
    pub expiry: Day,
}

/// A running certificate-revocation world.
pub struct CbeWorld {
    pub ledger: Ledger,
    pub authority: CbeAuthority,
    pub ca: Account,
    pub contract: Digest,
    pub deploy_tx: Digest,
    pub users: Vec<CbeUser>,
    rng: ChaCha20Rng,
}

impl CbeWorld {
    /// Deploy the revocation contract and enroll every configured user.
    pub fn build(scenario: CbeScenario) -> CbeWorld {
        let mut registry = contract::ProgramRegistry::new();
        registry.register(revocation_program());
        let mut ledger = Ledger::new(scenario.ledger, registry)
            .expect("scenario ledger config")
            .with_faults(scenario.faults);

        let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let mut authority = cbe::cbe_setup(scenario.seed, scenario.periods, scenario.tree_depth);
        let mut ca = Account::from_seed(scenario.seed.wrapping_mul(31).wrapping_add(1));
        ledger.register_account(&ca.verification_key(), true);

        let deploy = ca.sign_tx(
            &TxCall::Deploy {
                program: REVOCATION_PROGRAM.into(),
            },
            Vec::new(),
        );
        assert_eq!(ledger.submit(&deploy), SubmitOutcome::Accepted);
        ledger.advance_until_confirmed();
        let contract_id = deploy.id;

        let mut users = Vec::new();
        for (i, (label, expiry)) in scenario.users.iter().enumerate() {
            let mut account =
                Account::from_seed(scenario.seed.wrapping_mul(131).wrapping_add(i as u64 + 2));
            ledger.register_account(&account.verification_key(), true);
            let keys = authority
                .keygen(label, &mut rng)
                .expect("scenario within tree capacity");
            let aux = EnrollAux {
                user: label.clone(),
                owner: account.signer,
                sn: keys.sn,
                expiry: *expiry,
            };
            let enroll = ca.sign_tx(
                &TxCall::Call {
                    contract: contract_id,
                    op: "enroll".into(),
                },
                aux.canon_bytes(),
            );
            assert_eq!(ledger.submit(&enroll), SubmitOutcome::Accepted);
            let _ = &mut account;
            users.push(CbeUser {
                label: label.clone(),
                keys,
                account,
                expiry: *expiry,
            });
        }
        ledger.advance_until_confirmed();

        CbeWorld {
            ledger,
            authority,
            ca,
            contract: contract_id,
            deploy_tx: deploy.id,
            users,
            rng,
        }
    }

    pub fn user_index(&self, label: &[u8]) -> Option<usize> {
        self.users.iter().position(|u| u.label == label)
    }

    /// Submit a revocation request signed by the user; does not advance
    /// rounds. Returns the transaction id.
    pub fn submit_revocation(&mut self, user_idx: usize, request_day: Day) -> Digest {
        let user = &mut self.users[user_idx];
        let nonce = user.account.next_nonce();
        let tx = cbe::revocation_request(
            &user.account.keys,
            nonce,
            self.contract,
            &user.label,
            user.expiry,
            request_day,
        );
        self.ledger.submit(&tx);
        tx.id
    }

    /// Submit and confirm a revocation request.
    pub fn revoke(&mut self, user_idx: usize, request_day: Day) -> Digest {
        let id = self.submit_revocation(user_idx, request_day);
        self.ledger.advance_until_confirmed();
        id
    }

    /// The confirmed on-chain table (a State Read; recorded for gas).
    pub fn table(&mut self) -> RevocationTable {
        let state = contract::access(&self.ledger, &self.contract)
            .expect("revocation contract is deployed");
        let contract_id = self.contract;
        self.ledger.record_read(&contract_id);
        RevocationTable::from_state(&state)
    }

    /// CA-side certificate issuance for the period, from the confirmed table.
    pub fn issue_cert(&mut self, period: u32, user_idx: usize) -> Option<ReconfirmationCert> {
        let table = self.table();
        let label = self.users[user_idx].label.clone();
        cbe::cbe_cert(&self.authority.keys, period, &label, &table)
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

/// Parameters of a transparent-key-curator world.
#[derive(Clone)]
pub struct RbeScenario {
    pub ledger: LedgerConfig,
    pub faults: FaultSet,
    /// Number of keyed-hash instances (bounds the maximum tree depth).
    pub lambda: usize,
    /// Users created up front (registration happens per call).
    pub users: u32,
    pub seed: u64,
}

impl RbeScenario {
    pub fn simple(ledger: LedgerConfig, users: u32, seed: u64) -> RbeScenario {
        RbeScenario {
            ledger,
            faults: FaultSet::NONE,
            lambda: 16,
            users,
            seed,
        }
    }
}

pub struct RbeUser {
    pub id: Vec<u8>,
    pub keys: PkeKeypair,
    pub account: Account,
}

/// A running key-curator world: contract deployed and initialized, users
/// keyed but not yet registered.
pub struct RbeWorld {
    pub ledger: Ledger,
    pub contract: Digest,
    pub deploy_tx: Digest,
    pub crs: Digest,
    pub hks: Vec<HashKey>,
    pub users: Vec<RbeUser>,
    operator: Account,
    rng: ChaCha20Rng,
}

impl RbeWorld {
    pub fn build(scenario: RbeScenario) -> RbeWorld {
        let mut registry = contract::ProgramRegistry::new();
        registry.register(key_curator_program());
        let mut ledger = Ledger::new(scenario.ledger, registry)
            .expect("scenario ledger config")
            .with_faults(scenario.faults);

        let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let setup = rbe::rbe_setup(scenario.lambda, scenario.seed);
        let mut operator = Account::from_seed(scenario.seed.wrapping_mul(37).wrapping_add(5));
        ledger.register_account(&operator.verification_key(), true);

        let deploy = operator.sign_tx(
            &TxCall::Deploy {
                program: KEY_CURATOR_PROGRAM.into(),
            },
            Vec::new(),
        );
        assert_eq!(ledger.submit(&deploy), SubmitOutcome::Accepted);
        ledger.advance_until_confirmed();

        let init = operator.sign_tx(
            &TxCall::Call {
                contract: deploy.id,
                op: "init".into(),
            },
            InitAux {
                crs: setup.crs,
                hks: setup.pp.hks.clone(),
            }
            .canon_bytes(),
        );
        assert_eq!(ledger.submit(&init), SubmitOutcome::Accepted);
        ledger.advance_until_confirmed();

        let users = (0..scenario.users)
            .map(|i| {
                let mut account =
                    Account::from_seed(scenario.seed.wrapping_mul(173).wrapping_add(i as u64 + 7));
                ledger.register_account(&account.verification_key(), true);
                let _ = &mut account;
                RbeUser {
                    id: format!("id-{i}").into_bytes(),
                    keys: rbe::rbe_keygen(&mut rng),
                    account,
                }
            })
            .collect();

        RbeWorld {
            ledger,
            contract: deploy.id,
            deploy_tx: deploy.id,
            crs: setup.crs,
            hks: setup.pp.hks,
            users,
            operator,
            rng,
        }
    }

    /// Submit a registration for user `i`; does not advance rounds.
    pub fn submit_registration(&mut self, user_idx: usize) -> Digest {
        let user = &mut self.users[user_idx];
        let nonce = user.account.next_nonce();
        let tx = rbe::register_tx(
            &user.account.keys,
            nonce,
            self.contract,
            &user.id,
            &user.keys.public(),
        );
        self.ledger.submit(&tx);
        tx.id
    }

    /// Submit and confirm a registration.
    pub fn register(&mut self, user_idx: usize) -> Digest {
        let id = self.submit_registration(user_idx);
        self.ledger.advance_until_confirmed();
        id
    }

    fn confirmed_state(&mut self) -> crate::contract::ContractState {
        let state = contract::access(&self.ledger, &self.contract)
            .expect("key-curator contract is deployed");
        let contract_id = self.contract;
        self.ledger.record_read(&contract_id);
        state
    }

    /// Confirmed public parameters (a State Read; recorded for gas).
    pub fn pp(&mut self) -> PublicParams {
        rbe::curator::params_from_state(&self.confirmed_state())
            .expect("curator is initialized")
    }

    /// Confirmed forest (a State Read; recorded for gas).
    pub fn forest(&mut self) -> rbe::MerkleForest {
        rbe::curator::forest_from_state(&self.confirmed_state())
            .expect("curator is initialized")
    }

    /// On-chain update: a Merkle opening for `id` from the confirmed forest.
    pub fn opening(&mut self, id: &[u8]) -> Result<rbe::MerkleOpening, rbe::RbeError> {
        self.forest().opening(id)
    }

    pub fn operator(&mut self) -> &mut Account {
        &mut self.operator
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}
