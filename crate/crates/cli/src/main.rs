fn main() {
    std::process::exit(rehab_assess::run(std::env::args_os()));
}
