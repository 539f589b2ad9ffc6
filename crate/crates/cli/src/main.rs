fn main() {
    std::process::exit(pxp_cli::main_entry());
}
