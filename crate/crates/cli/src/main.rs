fn main() {
    std::process::exit(cvpbt_cli::run(std::env::args_os()));
}
