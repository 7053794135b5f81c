use stlex::concepts::{build_concept_bank, BankConfig};
use stlex::datasets::{gen_cruise, CruiseConfig};

fn main() {
    let set = gen_cruise(&CruiseConfig::default(), 42).unwrap();
    for basis in [500usize, 1000, 2000] {
        let mut config = BankConfig::for_dataset(&set, 7);
        config.basis_size = basis;
        config.bank_size = 1; // just probe the pool
        let start = std::time::Instant::now();
        let bank = build_concept_bank(&config).unwrap();
        println!(
            "basis={basis}: candidates={} pool={} elapsed={:.1?} mu0: m'={:.2} s'={:.2} s''={:.2}",
            bank.meta().candidate_count,
            bank.meta().pool_size,
            start.elapsed(),
            config.mu0.m_start,
            config.mu0.sigma_start,
            config.mu0.sigma_tv,
        );
    }
}
