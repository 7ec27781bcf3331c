fn main() {
    std::process::exit(msr_surrogate::cli::run());
}
