fn main() {
    std::process::exit(plasticity_control::cli::main_entry());
}
